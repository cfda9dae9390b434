#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "cli_common.hpp"
#include "specklediff/trainer.hpp"

namespace specklediff::cli {

/// Flags shared by denoise and sweep.
struct InferenceOptions {
  std::string checkpoint;
  std::string normalization = "auto";
  int pad_to = 0;
  std::uint64_t seed = 0;
  int jobs = 1;
};

void add_inference_options(CLI::App& sub, InferenceOptions& o);

/// Loads a volume and applies the requested normalization.
Volume load_normalized(const std::string& path, const InferenceOptions& o, int repeats_per_location = 1);

/// Pads a slice to the network's working size (when --pad-to is set), runs
/// `fn` on it and crops the result back.
Image with_padding(const Image& slice, int pad_to, const std::function<Image(const Image&)>& fn);

}  // namespace specklediff::cli
