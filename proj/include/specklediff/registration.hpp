#pragma once

#include <string>

#include "specklediff/image.hpp"

namespace specklediff {

enum class RegistrationMethod { none, translation, external };

std::string to_string(RegistrationMethod m);
RegistrationMethod registration_method_from_string(const std::string& s);

struct RegistrationOptions {
  /// Search window for the translation method, in pixels per axis.
  int max_shift = 5;
  /// Shell command for the external method. "{moving}", "{fixed}" and "{out}"
  /// are replaced by file paths; the command must write the registered moving
  /// image to {out} in the same format.
  std::string external_command;
  /// "raw" (float32 container) or "png" (16-bit, [-1, 1] window).
  std::string external_format = "raw";
};

struct Registered {
  Image image;
  /// Estimated displacement: moving(y, x) ~ fixed(y - dy, x - dx).
  int dy = 0;
  int dx = 0;
};

/// Resamples `moving` into the frame of `fixed`.
Registered register_image(const Image& moving, const Image& fixed, RegistrationMethod method,
                          const RegistrationOptions& options = {});

/// out(y, x) = img(y + dy, x + dx), clamping reads to the border.
Image shift_image(const Image& img, int dy, int dx);

/// Integer shift maximising normalized cross-correlation over the overlap.
std::pair<int, int> estimate_translation(const Image& moving, const Image& fixed, int max_shift);

}  // namespace specklediff
