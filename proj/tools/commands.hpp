#pragma once

#include <functional>

#include <CLI11.hpp>

namespace specklediff::cli {

/// Each function registers one subcommand and returns the action to run when
/// that subcommand was selected.
using Action = std::function<void()>;

Action add_synth(CLI::App& root);
Action add_selffuse(CLI::App& root);
Action add_train(CLI::App& root);
Action add_denoise(CLI::App& root);
Action add_sweep(CLI::App& root);
Action add_eval(CLI::App& root);

}  // namespace specklediff::cli
