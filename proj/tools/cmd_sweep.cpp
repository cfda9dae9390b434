#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

#include <json.hpp>

#include "commands.hpp"
#include "inference.hpp"
#include "specklediff/checkpoint.hpp"
#include "specklediff/io.hpp"
#include "specklediff/metrics.hpp"
#include "specklediff/random.hpp"
#include "specklediff/rois.hpp"
#include "specklediff/sampler.hpp"

namespace fs = std::filesystem;

namespace specklediff::cli {

namespace {

struct SweepOptions {
  InferenceOptions inf;
  std::string input;
  std::string out;
  std::string rois;
  std::string reference;
  std::vector<int> t_list;
  std::string domain = "intensity";
  int gap = 2;
};

/// Tiles[row][col] into one image with `gap` pixels of white between tiles.
Image compose_grid(const std::vector<std::vector<Image>>& tiles, int gap) {
  const int h = tiles.front().front().height(), w = tiles.front().front().width();
  const int rows = static_cast<int>(tiles.size()), cols = static_cast<int>(tiles.front().size());
  Image grid(rows * h + (rows - 1) * gap, cols * w + (cols - 1) * gap, 1.0f);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const Image& tile = tiles[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) grid(r * (h + gap) + y, c * (w + gap) + x) = tile(y, x);
    }
  return grid;
}

void run(const SweepOptions& o) {
  if (o.t_list.empty()) throw UsageError("--t-list is empty");
  if (std::set<int>(o.t_list.begin(), o.t_list.end()).size() != o.t_list.size())
    throw UsageError("--t-list has repeated values");
  if (o.gap < 0) throw UsageError("--gap must be >= 0");
  const Checkpoint ckpt = load_checkpoint(o.inf.checkpoint);
  for (int t : o.t_list)
    if (t < 0 || t > ckpt.schedule.T())
      throw UsageError("--t-list value " + std::to_string(t) + " outside [0, " + std::to_string(ckpt.schedule.T()) + "]");

  const Volume in = load_normalized(o.input, o.inf);
  const EpsFn model = as_eps_fn(ckpt.model);
  const std::size_t nt = o.t_list.size(), ns = in.size();

  // results[t index][slice]
  std::vector<std::vector<Image>> results(nt, std::vector<Image>(ns));
  parallel_for(nt * ns, o.inf.jobs, [&](std::size_t k) {
    const std::size_t ti = k / ns, s = k % ns;
    results[ti][s] = with_padding(in.slices[s], o.inf.pad_to, [&](const Image& x) {
      return sweep_t(x, {o.t_list[ti]}, model, ckpt.schedule, derive_seed(o.inf.seed, s)).front().second;
    });
  });

  fs::create_directories(o.out);
  nlohmann::json summary{{"input", o.input}, {"seed", o.inf.seed}, {"t_list", o.t_list}, {"outputs", nlohmann::json::array()}};
  for (std::size_t ti = 0; ti < nt; ++ti) {
    Volume v;
    v.slices = results[ti];
    const std::string stem = indexed_name("t_", static_cast<std::size_t>(o.t_list[ti]));
    save_volume(v, (fs::path(o.out) / (stem + ".raw")).string());
    const std::string viewable = stem + (ns == 1 ? ".png" : ".tif");
    save_volume(v, (fs::path(o.out) / viewable).string());
    summary["outputs"].push_back({{"t", o.t_list[ti]}, {"raw", stem + ".raw"}, {"image", viewable}});
  }
  save_png16(compose_grid(results, o.gap), (fs::path(o.out) / "grid.png").string());
  summary["grid"] = "grid.png";

  if (!o.rois.empty()) {
    const ROISet rois = load_rois(o.rois);
    std::optional<Volume> ref;
    if (!o.reference.empty()) ref = load_normalized(o.reference, o.inf);
    if (ref && ref->size() != ns) throw UsageError("--reference slice count differs from --input");
    std::ofstream csv(fs::path(o.out) / "sweep.csv");
    csv << "t,slice," << metrics_csv_header() << '\n';
    for (std::size_t ti = 0; ti < nt; ++ti)
      for (std::size_t s = 0; s < ns; ++s) {
        const Image x = to_metric_domain(results[ti][s], o.domain);
        const Image y = ref ? to_metric_domain(ref->slices[s], o.domain) : Image();
        MetricsReport r = evaluate(x, ref ? &y : nullptr, rois);
        r.domain = o.domain;
        r.image_id = fs::path(o.input).stem().string() + "/" + std::to_string(s);
        r.method = "t=" + std::to_string(o.t_list[ti]);
        if (!o.reference.empty()) r.reference_id = o.reference;
        csv << o.t_list[ti] << ',' << s << ',' << metrics_csv_row(r) << '\n';
      }
    summary["metrics"] = "sweep.csv";
  }
  std::ofstream(fs::path(o.out) / "sweep.json") << summary.dump(2) << '\n';
  std::cout << "sweep: " << nt << " t values x " << ns << " slices -> " << o.out << '\n';
}

}  // namespace

Action add_sweep(CLI::App& root) {
  auto o = std::make_shared<SweepOptions>();
  CLI::App* sub = root.add_subcommand("sweep", "Denoise one input from several starting steps and tile the results");
  add_inference_options(*sub, o->inf);
  sub->add_option("--input", o->input, "Image or volume")->required()->check(CLI::ExistingPath);
  sub->add_option("--t-list", o->t_list, "Comma-separated starting steps; grid rows follow this order")
      ->required()
      ->delimiter(',');
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_option("--rois", o->rois, "ROI file; writes per-t metrics to sweep.csv")->check(CLI::ExistingFile);
  sub->add_option("--reference", o->reference, "Clean reference for PSNR in sweep.csv")->check(CLI::ExistingPath);
  sub->add_option("--domain", o->domain, "Intensity scale for sweep.csv metrics")
      ->check(CLI::IsMember(kDomainNames))
      ->capture_default_str();
  sub->add_option("--gap", o->gap, "Pixels between grid tiles")->capture_default_str();
  return [o] { run(*o); };
}

}  // namespace specklediff::cli
