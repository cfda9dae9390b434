#include "inference.hpp"

#include "specklediff/io.hpp"
#include "specklediff/preprocess.hpp"

namespace specklediff::cli {

void add_inference_options(CLI::App& sub, InferenceOptions& o) {
  sub.add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  sub.add_option("--normalize", o.normalization, "Input normalization")
      ->check(CLI::IsMember(kNormalizationNames))
      ->capture_default_str();
  sub.add_option("--pad-to", o.pad_to, "Pad slices to N x N before inference and crop afterwards (0: off)")
      ->capture_default_str();
  sub.add_option("--seed", o.seed, "Seed for the reverse-chain noise")->capture_default_str();
  sub.add_option("--jobs", o.jobs, "Worker threads")->capture_default_str();
}

Volume load_normalized(const std::string& path, const InferenceOptions& o, int repeats_per_location) {
  VolumeLayout layout;
  layout.repeats_per_location = repeats_per_location;
  return apply_normalization(average_volume_repeats(load_volume(path, layout)),
                             normalization_from_string(o.normalization));
}

Image with_padding(const Image& slice, int pad_to, const std::function<Image(const Image&)>& fn) {
  if (pad_to <= 0) return fn(slice);
  const Padded p = pad_to_square(slice, pad_to);
  return crop(fn(p.image), p.crop);
}

}  // namespace specklediff::cli
