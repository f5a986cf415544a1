#pragma once

#include "d2oc/config.hpp"
#include "d2oc/simulation.hpp"

#include <string>

namespace d2oc {

/**
 * Writes into `dir` (created if missing):
 *   trajectories.csv   step,agent_id,x,y,z
 *   links.csv          step,i,j,distance
 *   map.csv            reference samples with weights
 *   metrics.json       config echo, final SWD, completion, per-step series
 *   trajectories.dat, distances.dat, plot.gp   gnuplot inputs
 * Numbers are written with 17 significant digits so a re-import is exact.
 */
void export_run(const RunRecord& record, const SimConfig& config, const std::string& dir);

/// Reads trajectories.csv back into per-step position matrices of the given dimension.
std::vector<Matrix> read_trajectories(const std::string& path, int dim);

}  // namespace d2oc
