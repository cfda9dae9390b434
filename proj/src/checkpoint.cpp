#include "specklediff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "specklediff/errors.hpp"

namespace specklediff {

namespace {

constexpr char kMagic[8] = {'S', 'D', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

struct PayloadWriter {
  nlohmann::json arrays = nlohmann::json::array();
  std::string bytes;

  template <typename T>
  void add(const std::string& name, const std::vector<int>& shape, std::span<const T> data) {
    const std::size_t nbytes = data.size() * sizeof(T);
    arrays.push_back({{"name", name},
                      {"shape", shape},
                      {"dtype", sizeof(T) == 4 ? "float32" : "float64"},
                      {"offset", bytes.size()},
                      {"nbytes", nbytes}});
    bytes.append(reinterpret_cast<const char*>(data.data()), nbytes);
  }
};

template <typename T>
std::vector<T> read_array(const nlohmann::json& manifest, const std::string& payload, const std::string& name,
                          std::size_t expected, const std::string& path) {
  for (const auto& a : manifest.at("arrays")) {
    if (a.at("name").get<std::string>() != name) continue;
    const std::string want = sizeof(T) == 4 ? "float32" : "float64";
    if (a.at("dtype").get<std::string>() != want) throw IoError(path + ": array " + name + " is not " + want);
    const auto offset = a.at("offset").get<std::size_t>();
    const auto nbytes = a.at("nbytes").get<std::size_t>();
    if (nbytes != expected * sizeof(T)) throw IoError(path + ": array " + name + " has the wrong size");
    if (offset + nbytes > payload.size()) throw IoError(path + ": array " + name + " runs past the payload");
    std::vector<T> out(expected);
    std::memcpy(out.data(), payload.data() + offset, nbytes);
    return out;
  }
  throw IoError(path + ": missing array " + name);
}

}  // namespace

nlohmann::json network_to_json(const NetworkConfig& c) {
  return {{"base_channels", c.base_channels}, {"depth", c.depth},       {"time_embed_dim", c.time_embed_dim},
          {"T", c.T},                         {"activation", c.activation}, {"normalization", c.normalization},
          {"downsample", "avgpool2"},         {"upsample", "nearest2"},   {"kernel", 3}};
}

NetworkConfig network_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.base_channels = j.value("base_channels", c.base_channels);
  c.depth = j.value("depth", c.depth);
  c.time_embed_dim = j.value("time_embed_dim", c.time_embed_dim);
  c.T = j.value("T", c.T);
  c.activation = j.value("activation", c.activation);
  c.normalization = j.value("normalization", c.normalization);
  if (j.value("downsample", std::string("avgpool2")) != "avgpool2" || j.value("upsample", std::string("nearest2")) != "nearest2")
    throw ConfigError("checkpoint describes an unsupported resampling scheme");
  c.validate();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  PayloadWriter pw;
  for (const auto& p : ckpt.model.params()) pw.add<float>("param/" + p.name, p.shape, p.value);
  const auto& params = ckpt.model.params();
  if (ckpt.adam.m.size() == params.size()) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      pw.add<float>("adam.m/" + params[k].name, params[k].shape, ckpt.adam.m[k]);
      pw.add<float>("adam.v/" + params[k].name, params[k].shape, ckpt.adam.v[k]);
    }
  }
  pw.add<double>("schedule/betas", {ckpt.schedule.T()}, ckpt.schedule.betas());

  const nlohmann::json manifest = {
      {"format", "specklediff-checkpoint"},
      {"version", 1},
      {"network", network_to_json(ckpt.model.config())},
      {"train", ckpt.train},
      {"schedule", {{"kind", "linear"}, {"T", ckpt.schedule.T()}, {"beta_start", ckpt.schedule.beta_start()},
                    {"beta_end", ckpt.schedule.beta_end()}}},
      {"adam", {{"beta1", ckpt.adam.beta1}, {"beta2", ckpt.adam.beta2}, {"eps", ckpt.adam.eps},
                {"step", ckpt.adam.step}, {"has_moments", ckpt.adam.m.size() == params.size()}}},
      {"epoch", ckpt.epoch},
      {"step", ckpt.step},
      {"seed", ckpt.train.seed},
      {"parameter_count", ckpt.model.parameter_count()},
      {"arrays", pw.arrays}};
  const std::string text = manifest.dump(1);
  const std::uint64_t n = text.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(pw.bytes.data(), static_cast<std::streamsize>(pw.bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  std::uint64_t n = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&n), 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError(path + ": not a specklediff checkpoint");
  if (n > (1ull << 30)) throw IoError(path + ": implausible manifest length");
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError(path + ": truncated manifest");
  const std::string payload((std::istreambuf_iterator<char>(in)), {});

  try {
    const auto manifest = nlohmann::json::parse(text);
    Checkpoint ck;
    ck.train = manifest.at("train").get<TrainConfig>();
    const NetworkConfig net = network_from_json(manifest.at("network"));
    ck.model = EpsilonPredictor(net, 0);
    for (auto& p : ck.model.params()) {
      const auto v = read_array<float>(manifest, payload, "param/" + p.name, p.size(), path);
      p.value.assign(v.begin(), v.end());
    }
    const int T = manifest.at("schedule").at("T").get<int>();
    ck.schedule = VarianceSchedule(read_array<double>(manifest, payload, "schedule/betas", static_cast<std::size_t>(T), path));
    const auto& adam = manifest.at("adam");
    ck.adam.beta1 = adam.at("beta1").get<double>();
    ck.adam.beta2 = adam.at("beta2").get<double>();
    ck.adam.eps = adam.at("eps").get<double>();
    ck.adam.reset(ck.model);
    ck.adam.step = adam.at("step").get<std::int64_t>();
    if (adam.value("has_moments", false)) {
      const auto& params = ck.model.params();
      for (std::size_t k = 0; k < params.size(); ++k) {
        ck.adam.m[k] = read_array<float>(manifest, payload, "adam.m/" + params[k].name, params[k].size(), path);
        ck.adam.v[k] = read_array<float>(manifest, payload, "adam.v/" + params[k].name, params[k].size(), path);
      }
    }
    ck.epoch = manifest.at("epoch").get<int>();
    ck.step = manifest.at("step").get<std::int64_t>();
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": malformed checkpoint manifest: " + e.what());
  }
}

}  // namespace specklediff
