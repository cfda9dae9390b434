#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include <json.hpp>

#include "cli_common.hpp"
#include "commands.hpp"
#include "specklediff/errors.hpp"
#include "specklediff/io.hpp"
#include "specklediff/manifest.hpp"
#include "specklediff/metrics.hpp"
#include "specklediff/preprocess.hpp"
#include "specklediff/rois.hpp"

namespace fs = std::filesystem;

namespace specklediff::cli {

namespace {

struct EvalOptions {
  std::string manifest;
  std::string role = "test";
  std::vector<std::string> methods;
  std::string baseline = "noisy";
  std::string input;
  std::string reference;
  std::string rois;
  std::string name = "input";
  std::string out_csv;
  std::string out_json;
  std::string normalization = "auto";
  std::string domain = "intensity";
  int jobs = 1;
};

struct Method {
  std::string name;
  std::string dir;
};

std::vector<Method> parse_methods(const std::vector<std::string>& specs) {
  std::vector<Method> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
      throw UsageError("--method expects NAME=DIR, got '" + s + "'");
    out.push_back({s.substr(0, eq), s.substr(eq + 1)});
  }
  return out;
}

std::string find_output(const std::string& dir, const std::string& id) {
  for (const char* ext : {".raw", ".tif", ".tiff", ".png"}) {
    const fs::path p = fs::path(dir) / (id + ext);
    if (fs::exists(p)) return p.string();
  }
  throw IoError("no output for '" + id + "' in " + dir);
}

Volume load_for_eval(const std::string& path, Normalization norm, int repeats = 1) {
  VolumeLayout layout;
  layout.repeats_per_location = repeats;
  return apply_normalization(average_volume_repeats(load_volume(path, layout)), norm);
}

/// One evaluation job: every slice of one image, against an optional reference.
struct Job {
  std::string image_id;
  std::string method;
  std::string path;
  std::string reference;
  std::string rois;
  int repeats = 1;
};

std::vector<MetricsReport> run_job(const Job& j, Normalization norm, const std::string& domain) {
  const Volume img = load_for_eval(j.path, norm, j.repeats);
  std::optional<Volume> ref;
  if (!j.reference.empty()) ref = load_for_eval(j.reference, norm);
  if (ref && ref->size() != img.size()) throw ContractError(j.path + ": slice count differs from the reference");
  const ROISet rois = load_rois(j.rois);
  std::vector<MetricsReport> out;
  for (std::size_t s = 0; s < img.size(); ++s) {
    const Image x = to_metric_domain(img.slices[s], domain);
    const Image y = ref ? to_metric_domain(ref->slices[s], domain) : Image();
    MetricsReport r = evaluate(x, ref ? &y : nullptr, rois);
    r.domain = domain;
    r.image_id = img.size() == 1 ? j.image_id : j.image_id + "/" + std::to_string(s);
    r.method = j.method;
    r.reference_id = j.reference.empty() ? "" : j.image_id;
    out.push_back(std::move(r));
  }
  return out;
}

double metric(const MetricsReport& r, const std::string& name) {
  if (name == "snr") return r.snr;
  if (name == "psnr") return r.psnr_infinite ? INFINITY : r.psnr;
  if (name == "cnr") return r.cnr;
  return r.enl;
}

nlohmann::json summarize(const std::vector<MetricsReport>& reports, const std::vector<std::string>& method_order,
                         const std::string& baseline) {
  static const std::vector<std::string> kMetrics{"snr", "psnr", "cnr", "enl"};
  std::map<std::string, std::map<std::string, const MetricsReport*>> by_method;
  for (const auto& r : reports) by_method[r.method][r.image_id] = &r;

  nlohmann::json means = nlohmann::json::object();
  for (const auto& m : method_order) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& k : kMetrics) {
      double sum = 0.0;
      int n = 0;
      for (const auto& [id, r] : by_method[m]) {
        const double v = metric(*r, k);
        if (std::isfinite(v)) {
          sum += v;
          ++n;
        }
      }
      row[k] = n > 0 ? nlohmann::json(sum / n) : nlohmann::json(nullptr);
      row[k + "_count"] = n;
    }
    means[m] = row;
  }

  nlohmann::json tests = nlohmann::json::array();
  for (const auto& m : method_order) {
    if (m == baseline) continue;
    for (const auto& k : kMetrics) {
      std::vector<double> a, b;
      for (const auto& [id, r] : by_method[m]) {
        const auto it = by_method[baseline].find(id);
        if (it == by_method[baseline].end()) continue;
        const double x = metric(*r, k), y = metric(*it->second, k);
        if (std::isfinite(x) && std::isfinite(y)) {
          a.push_back(x);
          b.push_back(y);
        }
      }
      nlohmann::json t{{"method", m}, {"baseline", baseline}, {"metric", k}, {"pairs", a.size()}};
      try {
        const TTest r = paired_t_test(a, b);
        t["t"] = r.t;
        t["p"] = r.p;
        t["dof"] = r.dof;
        t["mean_difference"] = r.mean_difference;
      } catch (const Error& e) {
        t["error"] = e.what();
      }
      tests.push_back(std::move(t));
    }
  }
  return {{"means", means}, {"paired_t_tests", tests}};
}

void run(const EvalOptions& o) {
  if (o.input.empty() == o.manifest.empty()) throw UsageError("give exactly one of --input or --manifest");
  const Normalization norm = normalization_from_string(o.normalization);
  std::vector<Job> jobs;
  std::vector<std::string> method_order;

  if (!o.input.empty()) {
    if (o.rois.empty()) throw UsageError("--rois is required with --input");
    jobs.push_back({o.name, o.name, o.input, o.reference, o.rois});
    method_order.push_back(o.name);
  } else {
    const DatasetManifest m = load_manifest(o.manifest);
    const auto entries = m.with_role(o.role);
    if (entries.empty()) throw UsageError("manifest has no entries with role '" + o.role + "'");
    const std::vector<Method> methods = parse_methods(o.methods);
    method_order.push_back(o.baseline);
    for (const auto& meth : methods) {
      if (meth.name == o.baseline) throw UsageError("method name '" + meth.name + "' clashes with the baseline");
      method_order.push_back(meth.name);
    }
    for (const DatasetEntry* e : entries) {
      if (!e->rois) throw UsageError(e->id + ": manifest entry has no rois");
      const std::string ref = e->clean ? m.resolve(*e->clean) : "";
      const std::string rois = m.resolve(*e->rois);
      jobs.push_back({e->id, o.baseline, m.resolve(e->noisy), ref, rois, e->repeats_per_location});
      for (const auto& meth : methods) jobs.push_back({e->id, meth.name, find_output(meth.dir, e->id), ref, rois});
    }
  }

  std::vector<std::vector<MetricsReport>> per_job(jobs.size());
  parallel_for(jobs.size(), o.jobs, [&](std::size_t i) { per_job[i] = run_job(jobs[i], norm, o.domain); });
  std::vector<MetricsReport> reports;
  for (auto& v : per_job)
    for (auto& r : v) reports.push_back(std::move(r));

  if (!fs::path(o.out_csv).parent_path().empty()) fs::create_directories(fs::path(o.out_csv).parent_path());
  std::ofstream csv(o.out_csv);
  if (!csv) throw IoError("cannot write " + o.out_csv);
  csv << metrics_csv_header() << '\n';
  for (const auto& r : reports) csv << metrics_csv_row(r) << '\n';

  nlohmann::json summary = summarize(reports, method_order, o.baseline);
  const std::string json_path = o.out_json.empty() ? fs::path(o.out_csv).replace_extension(".json").string() : o.out_json;
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot write " + json_path);
  js << nlohmann::json{{"reports", reports}, {"summary", summary}}.dump(2) << '\n';

  for (const auto& m : method_order) {
    const auto& row = summary["means"][m];
    const auto show = [&](const char* k) {
      return row[k].is_null() ? std::string("n/a") : std::to_string(row[k].get<double>());
    };
    std::printf("eval: %-12s snr %s psnr %s cnr %s enl %s\n", m.c_str(), show("snr").c_str(), show("psnr").c_str(),
                show("cnr").c_str(), show("enl").c_str());
  }
  std::cout << "eval: " << reports.size() << " rows -> " << o.out_csv << ", summary -> " << json_path << '\n';
}

}  // namespace

Action add_eval(CLI::App& root) {
  auto o = std::make_shared<EvalOptions>();
  CLI::App* sub = root.add_subcommand("eval", "Compute SNR, PSNR, CNR and ENL tables with paired t-tests");
  sub->add_option("--manifest", o->manifest, "Dataset manifest with clean references and ROIs")
      ->check(CLI::ExistingFile);
  sub->add_option("--role", o->role, "Manifest role to evaluate")->capture_default_str();
  sub->add_option("--method", o->methods, "NAME=DIR of outputs named <id>.raw|.tif|.png (repeatable)");
  sub->add_option("--baseline", o->baseline, "Name for the manifest's noisy images")->capture_default_str();
  sub->add_option("--input", o->input, "Single image to evaluate instead of a manifest")->check(CLI::ExistingPath);
  sub->add_option("--reference", o->reference, "Clean reference for --input")->check(CLI::ExistingPath);
  sub->add_option("--rois", o->rois, "ROI file for --input")->check(CLI::ExistingFile);
  sub->add_option("--name", o->name, "Method label for --input")->capture_default_str();
  sub->add_option("--out,--out-csv", o->out_csv, "Metrics CSV")->required();
  sub->add_option("--json", o->out_json, "Summary JSON (default: CSV path with .json)");
  sub->add_option("--normalize", o->normalization, "Input normalization")
      ->check(CLI::IsMember(kNormalizationNames))
      ->capture_default_str();
  sub->add_option("--domain", o->domain, "Intensity scale the metrics are computed on")
      ->check(CLI::IsMember(kDomainNames))
      ->capture_default_str();
  sub->add_option("--jobs", o->jobs, "Worker threads")->capture_default_str();
  return [o] { run(*o); };
}

}  // namespace specklediff::cli
