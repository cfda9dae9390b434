#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include <json.hpp>

#include "specklediff/checkpoint.hpp"
#include "specklediff/diffusion.hpp"
#include "specklediff/errors.hpp"
#include "specklediff/io.hpp"
#include "specklediff/metrics.hpp"
#include "specklediff/phantom.hpp"
#include "specklediff/preprocess.hpp"
#include "specklediff/sampler.hpp"
#include "specklediff/self_fusion.hpp"
#include "specklediff/trainer.hpp"

namespace py = pybind11;
using namespace specklediff;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image to_image(const FloatArray& a) {
  if (a.ndim() != 2) throw ContractError("expected a 2-D array, got " + std::to_string(a.ndim()) + " dimensions");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  return Image(h, w, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Image& img) {
  FloatArray out({img.height(), img.width()});
  std::memcpy(out.mutable_data(), img.data().data(), img.size() * sizeof(float));
  return out;
}

std::vector<Image> to_images(const FloatArray& a) {
  if (a.ndim() == 2) return {to_image(a)};
  if (a.ndim() != 3) throw ContractError("expected a 2-D image or a 3-D stack");
  const auto n = a.shape(0), h = a.shape(1), w = a.shape(2);
  std::vector<Image> out;
  for (py::ssize_t k = 0; k < n; ++k) {
    const float* p = a.data() + k * h * w;
    out.emplace_back(static_cast<int>(h), static_cast<int>(w), std::vector<float>(p, p + h * w));
  }
  return out;
}

FloatArray to_stack(const std::vector<Image>& slices) {
  if (slices.empty()) return FloatArray(std::vector<py::ssize_t>{0, 0, 0});
  const int h = slices.front().height(), w = slices.front().width();
  FloatArray out({static_cast<py::ssize_t>(slices.size()), static_cast<py::ssize_t>(h), static_cast<py::ssize_t>(w)});
  float* dst = out.mutable_data();
  for (const auto& s : slices) {
    std::memcpy(dst, s.data().data(), s.size() * sizeof(float));
    dst += s.size();
  }
  return out;
}

ROISet rois_from(const py::object& obj) {
  const auto j = nlohmann::json::parse(py::str(py::module_::import("json").attr("dumps")(obj)).cast<std::string>());
  return j.get<ROISet>();
}

py::object rois_to(const ROISet& r) {
  const nlohmann::json j = r;
  return py::module_::import("json").attr("loads")(j.dump());
}

PhantomSpec phantom_spec(const py::kwargs& kw) {
  PhantomSpec s;
  for (const auto& [key, value] : kw) {
    const auto k = key.cast<std::string>();
    if (k == "height") s.height = value.cast<int>();
    else if (k == "width") s.width = value.cast<int>();
    else if (k == "layers") s.layers = value.cast<int>();
    else if (k == "levels") s.levels = value.cast<std::vector<double>>();
    else if (k == "background_level") s.background_level = value.cast<double>();
    else if (k == "deep_level") s.deep_level = value.cast<double>();
    else if (k == "vessel_level") s.vessel_level = value.cast<double>();
    else if (k == "vessels") s.vessels = value.cast<int>();
    else if (k == "undulation") s.undulation = value.cast<double>();
    else if (k == "speckle") s.speckle = speckle_model_from_string(value.cast<std::string>());
    else if (k == "gamma_shape") s.gamma_shape = value.cast<double>();
    else if (k == "gaussian_sigma") s.gaussian_sigma = value.cast<double>();
    else if (k == "no_noise") s.no_noise = value.cast<bool>();
    else if (k == "seed") s.seed = value.cast<std::uint64_t>();
    else throw ConfigError("unknown phantom option '" + k + "'");
  }
  return s;
}

TrainConfig train_config(const py::dict& d) {
  const auto j = nlohmann::json::parse(py::str(py::module_::import("json").attr("dumps")(d)).cast<std::string>());
  TrainConfig c = j.get<TrainConfig>();
  c.validate();
  return c;
}

NetworkConfig network_preset(const std::string& name) {
  if (name == "desk") return NetworkConfig::desk();
  if (name == "tiny") return NetworkConfig::tiny();
  if (name == "large") return NetworkConfig::large();
  throw ConfigError("unknown network preset '" + name + "'");
}

/// Checkpoint plus the calls that need it.
class Model {
 public:
  explicit Model(Checkpoint c) : ckpt_(std::move(c)) {}

  FloatArray predict_eps(const FloatArray& xt, int t) const {
    Image x = to_image(xt);
    Image out;
    {
      py::gil_scoped_release release;
      out = ckpt_.model.predict(x, t);
    }
    return to_array(out);
  }

  FloatArray denoise(const FloatArray& x, int t, std::uint64_t seed, bool add_noise) const {
    Image img = to_image(x);
    Image out;
    {
      py::gil_scoped_release release;
      Rng rng(seed);
      out = specklediff::denoise(img, t, as_eps_fn(ckpt_.model), ckpt_.schedule, rng, add_noise);
    }
    return to_array(out);
  }

  std::vector<std::pair<int, FloatArray>> sweep(const FloatArray& x, const std::vector<int>& t_list,
                                                std::uint64_t seed) const {
    Image img = to_image(x);
    std::vector<std::pair<int, Image>> res;
    {
      py::gil_scoped_release release;
      res = sweep_t(img, t_list, as_eps_fn(ckpt_.model), ckpt_.schedule, seed);
    }
    std::vector<std::pair<int, FloatArray>> out;
    for (const auto& [t, im] : res) out.emplace_back(t, to_array(im));
    return out;
  }

  void save(const std::string& path) const { save_checkpoint(ckpt_, path); }
  int epoch() const { return ckpt_.epoch; }
  std::size_t parameter_count() const { return ckpt_.model.parameter_count(); }
  const VarianceSchedule& schedule() const { return ckpt_.schedule; }
  const Checkpoint& checkpoint() const { return ckpt_; }

 private:
  Checkpoint ckpt_;
};

}  // namespace

PYBIND11_MODULE(_specklediff, m) {
  m.doc() = "Diffusion-model speckle denoising for OCT b-scans";

  py::register_exception<Error>(m, "SpeckleDiffError", PyExc_ValueError);

  py::class_<VarianceSchedule>(m, "VarianceSchedule")
      .def_property_readonly("T", &VarianceSchedule::T)
      .def_property_readonly("betas", &VarianceSchedule::betas)
      .def_property_readonly("alpha_bars", &VarianceSchedule::alpha_bars)
      .def_property_readonly("tilde_betas", &VarianceSchedule::tilde_betas)
      .def("beta", &VarianceSchedule::beta, py::arg("t"))
      .def("alpha_bar", &VarianceSchedule::alpha_bar, py::arg("t"))
      .def("tilde_beta", &VarianceSchedule::tilde_beta, py::arg("t"));
  m.def("make_linear_schedule", &make_linear_schedule, py::arg("T"), py::arg("beta_start"), py::arg("beta_end"));
  m.def("default_schedule", &default_schedule);

  m.def(
      "q_sample",
      [](const FloatArray& x0, int t, const FloatArray& eps, const VarianceSchedule& s) {
        return to_array(q_sample(to_image(x0), t, to_image(eps), s));
      },
      py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("schedule"));
  m.def(
      "q_posterior",
      [](const FloatArray& x0, const FloatArray& xt, int t, const VarianceSchedule& s) {
        const auto g = q_posterior(to_image(x0), to_image(xt), t, s);
        return py::make_tuple(to_array(g.mean), g.variance);
      },
      py::arg("x0"), py::arg("xt"), py::arg("t"), py::arg("schedule"), "Returns (mean, variance).");
  m.def(
      "predict_mu_from_eps",
      [](const FloatArray& xt, int t, const FloatArray& eps, const VarianceSchedule& s) {
        return to_array(predict_mu_from_eps(to_image(xt), t, to_image(eps), s));
      },
      py::arg("xt"), py::arg("t"), py::arg("eps"), py::arg("schedule"));
  m.def("kl_gaussian", py::overload_cast<double, double, double, double>(&kl_gaussian), py::arg("mu1"),
        py::arg("var1"), py::arg("mu2"), py::arg("var2"));

  m.def(
      "make_phantom",
      [](const py::kwargs& kw) {
        const Phantom ph = make_phantom(phantom_spec(kw));
        py::dict d;
        d["clean"] = to_array(ph.clean);
        d["noisy"] = to_array(ph.noisy);
        d["rois"] = rois_to(ph.rois);
        return d;
      },
      "Synthetic speckled b-scan in [-1, 1]. Keyword arguments mirror the phantom options of `specklediff synth`.");
  m.def(
      "make_phantom_volume",
      [](int slices, double drift, const py::kwargs& kw) {
        const PhantomVolume pv = make_phantom_volume(phantom_spec(kw), slices, drift);
        py::dict d;
        d["clean"] = to_stack(pv.clean.slices);
        d["noisy"] = to_stack(pv.noisy.slices);
        d["rois"] = rois_to(pv.rois);
        return d;
      },
      py::arg("slices"), py::arg("drift") = 0.05);

  m.def("normalize", [](const FloatArray& x) { return to_array(normalize(to_image(x))); }, py::arg("image"));

  m.def(
      "fuse_volume",
      [](const FloatArray& stack, int radius, const std::string& registration, std::optional<double> bandwidth) {
        Volume v;
        v.slices = to_images(stack);
        FusionConfig cfg;
        cfg.radius = radius;
        cfg.registration = registration_method_from_string(registration);
        cfg.bandwidth = bandwidth;
        Volume out;
        {
          py::gil_scoped_release release;
          out = fuse_volume(v, cfg);
        }
        return to_stack(out.slices);
      },
      py::arg("volume"), py::arg("radius") = 3, py::arg("registration") = "translation",
      py::arg("bandwidth") = py::none());

  py::class_<Model>(m, "Model")
      .def("predict_eps", &Model::predict_eps, py::arg("xt"), py::arg("t"))
      .def("denoise", &Model::denoise, py::arg("image"), py::arg("t"), py::arg("seed") = 0,
           py::arg("add_noise") = true)
      .def("sweep", &Model::sweep, py::arg("image"), py::arg("t_list"), py::arg("seed") = 0)
      .def("save", &Model::save, py::arg("path"))
      .def_property_readonly("epoch", &Model::epoch)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def_property_readonly("schedule", &Model::schedule, py::return_value_policy::reference_internal);
  m.def(
      "load_checkpoint", [](const std::string& path) { return Model(load_checkpoint(path)); }, py::arg("path"));
  m.def(
      "train",
      [](const FloatArray& images, const std::string& network, const py::dict& config) {
        const std::vector<Image> data = to_images(images);
        const TrainConfig cfg = train_config(config);
        const NetworkConfig net = network_preset(network);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(data, net, cfg);
        }
        return py::make_tuple(Model(std::move(r.checkpoint)), r.epoch_median_loss);
      },
      py::arg("images"), py::arg("network") = "desk", py::arg("config") = py::dict(),
      "Trains on a stack of reference images. `config` takes TrainConfig keys. Returns (model, per-epoch median losses).");

  m.def(
      "psnr", [](const FloatArray& x, const FloatArray& ref) { return psnr_db(to_image(x), to_image(ref)); },
      py::arg("image"), py::arg("reference"));
  m.def(
      "snr", [](const FloatArray& x, const py::object& rois) { return snr_db(to_image(x), rois_from(rois)); },
      py::arg("image"), py::arg("rois"));
  m.def(
      "cnr", [](const FloatArray& x, const py::object& rois) { return cnr(to_image(x), rois_from(rois)); },
      py::arg("image"), py::arg("rois"));
  m.def(
      "enl", [](const FloatArray& x, const py::object& rois) { return enl(to_image(x), rois_from(rois)); },
      py::arg("image"), py::arg("rois"));
  m.def(
      "paired_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const TTest r = paired_t_test(a, b);
        py::dict d;
        d["t"] = r.t;
        d["p"] = r.p;
        d["dof"] = r.dof;
        d["mean_difference"] = r.mean_difference;
        return d;
      },
      py::arg("a"), py::arg("b"));
  m.def("spearman_rho", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman_rho(x, y); },
        py::arg("x"), py::arg("y"));

  m.def("load_raw", [](const std::string& path) { return to_stack(load_raw(path)); }, py::arg("path"));
  m.def(
      "save_raw", [](const FloatArray& stack, const std::string& path) { save_raw(to_images(stack), path); },
      py::arg("volume"), py::arg("path"));
}
