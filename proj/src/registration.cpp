#include "specklediff/registration.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "specklediff/errors.hpp"
#include "specklediff/io.hpp"

namespace fs = std::filesystem;

namespace specklediff {

std::string to_string(RegistrationMethod m) {
  switch (m) {
    case RegistrationMethod::none:
      return "none";
    case RegistrationMethod::translation:
      return "translation";
    case RegistrationMethod::external:
      return "external";
  }
  return "none";
}

RegistrationMethod registration_method_from_string(const std::string& s) {
  if (s == "none") return RegistrationMethod::none;
  if (s == "translation") return RegistrationMethod::translation;
  if (s == "external") return RegistrationMethod::external;
  throw ConfigError("unknown registration method '" + s + "'");
}

Image shift_image(const Image& img, int dy, int dx) {
  Image out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    const int sy = std::clamp(y + dy, 0, img.height() - 1);
    for (int x = 0; x < img.width(); ++x) out(y, x) = img(sy, std::clamp(x + dx, 0, img.width() - 1));
  }
  return out;
}

std::pair<int, int> estimate_translation(const Image& moving, const Image& fixed, int max_shift) {
  require_same_shape(moving, fixed, "estimate_translation");
  const int H = fixed.height(), W = fixed.width();
  max_shift = std::min({max_shift, H - 2, W - 2});
  std::vector<std::pair<int, int>> candidates;
  for (int dy = -max_shift; dy <= max_shift; ++dy)
    for (int dx = -max_shift; dx <= max_shift; ++dx) candidates.emplace_back(dy, dx);
  // Smaller displacements first so ties resolve towards no motion.
  std::stable_sort(candidates.begin(), candidates.end(), [](auto a, auto b) {
    return std::abs(a.first) + std::abs(a.second) < std::abs(b.first) + std::abs(b.second);
  });

  double best = -2.0;
  std::pair<int, int> arg{0, 0};
  for (auto [dy, dx] : candidates) {
    const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
    double sm = 0, sf = 0, smm = 0, sff = 0, smf = 0;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const double m = moving(y + dy, x + dx), f = fixed(y, x);
        sm += m;
        sf += f;
        smm += m * m;
        sff += f * f;
        smf += m * f;
      }
    const double n = static_cast<double>(y1 - y0) * (x1 - x0);
    const double cov = smf - sm * sf / n;
    const double vm = smm - sm * sm / n, vf = sff - sf * sf / n;
    const double ncc = (vm > 0 && vf > 0) ? cov / std::sqrt(vm * vf) : -1.0;
    if (ncc > best + 1e-12) {
      best = ncc;
      arg = {dy, dx};
    }
  }
  return arg;
}

namespace {

std::string substitute(std::string cmd, const std::string& key, const std::string& value) {
  for (std::size_t pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key, pos + value.size()))
    cmd.replace(pos, key.size(), value);
  return cmd;
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

Registered run_external(const Image& moving, const Image& fixed, const RegistrationOptions& opt) {
  if (opt.external_command.empty())
    throw RegistrationError("external registration selected but no command template configured");
  if (opt.external_format != "raw" && opt.external_format != "png")
    throw ConfigError("external registration format must be raw or png");
  static std::atomic<unsigned> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("specklediff-reg-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::create_directories(dir);
  const std::string ext = "." + opt.external_format;
  const fs::path mv = dir / ("moving" + ext), fx = dir / ("fixed" + ext), out = dir / ("out" + ext);
  const fs::path log = dir / "stderr.txt";
  save_image(moving, mv.string());
  save_image(fixed, fx.string());
  std::string cmd = substitute(opt.external_command, "{moving}", quote(mv.string()));
  cmd = substitute(cmd, "{fixed}", quote(fx.string()));
  cmd = substitute(cmd, "{out}", quote(out.string()));
  const int status = std::system((cmd + " 2> " + quote(log.string())).c_str());
  auto cleanup = [&] {
    std::error_code ec;
    fs::remove_all(dir, ec);
  };
  if (status != 0 || !fs::exists(out)) {
    std::ostringstream msg;
    msg << "external registration failed (status " << status << ") for command: " << cmd;
    std::ifstream err(log);
    std::string text((std::istreambuf_iterator<char>(err)), {});
    if (!text.empty()) msg << "\nstderr: " << text;
    cleanup();
    throw RegistrationError(msg.str());
  }
  Registered r;
  try {
    r.image = load_image(out.string());
  } catch (const Error& e) {
    cleanup();
    throw RegistrationError(std::string("external registration output unreadable: ") + e.what());
  }
  cleanup();
  if (!r.image.same_shape(fixed)) throw RegistrationError("external registration returned an image of the wrong shape");
  return r;
}

}  // namespace

Registered register_image(const Image& moving, const Image& fixed, RegistrationMethod method,
                          const RegistrationOptions& options) {
  require_same_shape(moving, fixed, "register_image");
  switch (method) {
    case RegistrationMethod::none:
      return {moving, 0, 0};
    case RegistrationMethod::translation: {
      const auto [dy, dx] = estimate_translation(moving, fixed, options.max_shift);
      return {shift_image(moving, dy, dx), dy, dx};
    }
    case RegistrationMethod::external:
      return run_external(moving, fixed, options);
  }
  throw ConfigError("unknown registration method");
}

}  // namespace specklediff
