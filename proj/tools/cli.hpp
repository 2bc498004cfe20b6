#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "muse/dataio.hpp"
#include "muse/lstm.hpp"

namespace muse::cli {

// Exit codes shared by every command.
enum Exit : int { ok = 0, internal = 1, usage = 2, data = 3, numeric = 4 };

struct RunConfig {
    seq::Task task = seq::Task::wilder;
    double grid_hz = 4.0;
    dataio::WindowSpec window;
    seq::RegressorConfig model;
    std::uint64_t seed = 101;
};

// wilder, sent: 4 Hz grid, 200/100 windows. stress, physio: 2 Hz, 300/50.
[[nodiscard]] RunConfig default_run_config(seq::Task task);

// Runs one command line (program name excluded) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace muse::cli
