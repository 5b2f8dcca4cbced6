#include "shapesurv/widedeep.hpp"

#include <fstream>
#include <stdexcept>

#include "shapesurv/errors.hpp"

namespace shapesurv {

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::Wide: return "wide";
    case ModelVariant::Deep: return "deep";
    case ModelVariant::WideDeep: return "widedeep";
  }
  throw std::logic_error("unreachable variant");
}

ModelVariant variant_from_string(const std::string& s) {
  if (s == "wide") return ModelVariant::Wide;
  if (s == "deep") return ModelVariant::Deep;
  if (s == "widedeep") return ModelVariant::WideDeep;
  throw UserError("unknown model variant '" + s + "' (expected wide, deep, or widedeep)");
}

WideDeepParams make_widedeep(const WideDeepConfig& config, Rng& rng) {
  WideDeepParams p;
  p.variant = config.variant;
  if (p.has_wide()) {
    if (config.wide_width <= 0) {
      throw std::invalid_argument("wide pathway requires a positive feature width");
    }
    p.w_wide = ad::Tensor::zeros({config.wide_width}, true);
  }
  if (p.has_deep()) {
    p.pointnet = make_pointnet(config.pointnet, rng);
    p.global_mlp = make_mlp(config.pointnet.descriptor_width(), config.global_mlp, rng);
    p.w_deep = ad::Tensor::zeros({config.global_mlp.back()}, true);
  }
  return p;
}

ad::Tensor feature_matrix(const std::vector<const FeatureVector*>& features) {
  if (features.empty()) throw std::invalid_argument("feature_matrix: empty batch");
  const int p = static_cast<int>(features.front()->values.size());
  std::vector<double> data;
  data.reserve(features.size() * static_cast<std::size_t>(p));
  for (const FeatureVector* f : features) {
    if (static_cast<int>(f->values.size()) != p) {
      throw std::invalid_argument("feature_matrix: inconsistent feature widths");
    }
    data.insert(data.end(), f->values.begin(), f->values.end());
  }
  return ad::Tensor::from(std::move(data), {static_cast<int>(features.size()), p});
}

ad::Tensor wide_scores(const WideDeepParams& params, const ad::Tensor& features) {
  if (!params.has_wide()) throw std::logic_error("model variant has no wide pathway");
  if (features.cols() != params.w_wide.size()) {
    throw std::invalid_argument("wide features " + ad::shape_string(features.shape()) +
                                " do not match w_wide of length " +
                                std::to_string(params.w_wide.size()));
  }
  ad::Tensor col = ad::reshape(params.w_wide, {params.w_wide.size(), 1});
  return ad::reshape(ad::matmul(features, col), {features.rows()});
}

ad::Tensor deep_scores(WideDeepParams& params, const std::vector<const PointCloud*>& clouds,
                       ad::Mode mode) {
  if (!params.has_deep()) throw std::logic_error("model variant has no deep pathway");
  ad::Tensor global = encode_batch(*params.pointnet, clouds, mode);
  ad::Tensor hidden = mlp_forward(*params.global_mlp, global, mode);
  ad::Tensor col = ad::reshape(params.w_deep, {params.w_deep.size(), 1});
  return ad::reshape(ad::matmul(hidden, col), {hidden.rows()});
}

ad::Tensor batch_scores(WideDeepParams& params, const ad::Tensor& features,
                        const std::vector<const PointCloud*>& clouds, ad::Mode mode) {
  if (params.variant == ModelVariant::Wide) return wide_scores(params, features);
  if (params.variant == ModelVariant::Deep) return deep_scores(params, clouds, mode);
  if (features.rows() != static_cast<int>(clouds.size())) {
    throw std::invalid_argument("batch_scores: " + std::to_string(features.rows()) +
                                " feature rows for " + std::to_string(clouds.size()) + " clouds");
  }
  return ad::add(wide_scores(params, features), deep_scores(params, clouds, mode));
}

double risk_score(WideDeepParams& params, const FeatureVector& x, const PointCloud& cloud) {
  ad::Tensor features = feature_matrix({&x});
  ad::Tensor scores = batch_scores(params, features, {&cloud}, ad::Mode::Eval);
  return scores.data()[0];
}

double wide_only_score(const WideDeepParams& params, const FeatureVector& x) {
  ad::Tensor features = feature_matrix({&x});
  return wide_scores(params, features).data()[0];
}

std::vector<ParamRef> collect_params(WideDeepParams& params) {
  std::vector<ParamRef> out;
  if (params.has_wide()) out.push_back({"w_wide", params.w_wide, true});
  if (params.has_deep()) {
    collect_params("pointnet.tnet_point", params.pointnet->tnet_point, out);
    collect_params("pointnet.tnet_fc", params.pointnet->tnet_fc, out);
    collect_params("pointnet.tnet_out", params.pointnet->tnet_out, out);
    collect_params("pointnet.point", params.pointnet->point, out);
    collect_params("global_mlp", *params.global_mlp, out);
    out.push_back({"w_deep", params.w_deep, true});
  }
  return out;
}

std::vector<BatchNormRef> collect_batchnorms(WideDeepParams& params) {
  std::vector<BatchNormRef> out;
  if (params.has_deep()) {
    collect_batchnorms("pointnet.tnet_point", params.pointnet->tnet_point, out);
    collect_batchnorms("pointnet.tnet_fc", params.pointnet->tnet_fc, out);
    collect_batchnorms("pointnet.point", params.pointnet->point, out);
    collect_batchnorms("global_mlp", *params.global_mlp, out);
  }
  return out;
}

std::vector<ad::Tensor> weight_tensors(WideDeepParams& params) {
  std::vector<ad::Tensor> out;
  for (const ParamRef& p : collect_params(params)) {
    if (p.is_weight) out.push_back(p.tensor);
  }
  return out;
}

ParamSnapshot snapshot(WideDeepParams& params) {
  ParamSnapshot s;
  for (const ParamRef& p : collect_params(params)) s.values.push_back(p.tensor.data());
  for (const BatchNormRef& b : collect_batchnorms(params)) {
    s.bn_means.push_back(b.state->running_mean);
    s.bn_vars.push_back(b.state->running_var);
  }
  return s;
}

void restore(WideDeepParams& params, const ParamSnapshot& snap) {
  auto refs = collect_params(params);
  if (refs.size() != snap.values.size()) {
    throw std::logic_error("snapshot does not match parameter structure");
  }
  for (std::size_t i = 0; i < refs.size(); ++i) refs[i].tensor.data() = snap.values[i];
  auto bns = collect_batchnorms(params);
  for (std::size_t i = 0; i < bns.size(); ++i) {
    bns[i].state->running_mean = snap.bn_means[i];
    bns[i].state->running_var = snap.bn_vars[i];
  }
}

namespace {

constexpr int kFormatVersion = 1;

nlohmann::json config_to_json(const WideDeepConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"point_mlp", c.pointnet.point_mlp},
          {"tnet_point_mlp", c.pointnet.tnet_point_mlp},
          {"tnet_fc", c.pointnet.tnet_fc},
          {"global_mlp", c.global_mlp},
          {"wide_width", c.wide_width}};
}

WideDeepConfig config_from_json(const nlohmann::json& j) {
  WideDeepConfig c;
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.pointnet.point_mlp = j.at("point_mlp").get<std::vector<int>>();
  c.pointnet.tnet_point_mlp = j.at("tnet_point_mlp").get<std::vector<int>>();
  c.pointnet.tnet_fc = j.at("tnet_fc").get<std::vector<int>>();
  c.global_mlp = j.at("global_mlp").get<std::vector<int>>();
  c.wide_width = j.at("wide_width").get<int>();
  return c;
}

}  // namespace

nlohmann::json checkpoint_to_json(WideDeepParams& params, const WideDeepConfig& config,
                                  const TabularEncoder& encoder) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["config"] = config_to_json(config);
  j["encoder"] = encoder.to_json();
  nlohmann::json tensors = nlohmann::json::object();
  for (const ParamRef& p : collect_params(params)) {
    tensors[p.name] = {{"shape", p.tensor.shape()}, {"data", p.tensor.data()}};
  }
  j["params"] = tensors;
  nlohmann::json norms = nlohmann::json::object();
  for (const BatchNormRef& b : collect_batchnorms(params)) {
    norms[b.name] = {{"running_mean", b.state->running_mean},
                     {"running_var", b.state->running_var},
                     {"momentum", b.state->momentum},
                     {"eps", b.state->eps}};
  }
  j["batch_norms"] = norms;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kFormatVersion) {
    throw UserError("unsupported checkpoint format version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config = config_from_json(j.at("config"));
  ck.encoder = TabularEncoder::from_json(j.at("encoder"));
  Rng rng(0);  // structure only; every value is overwritten below
  ck.params = make_widedeep(ck.config, rng);
  const auto& tensors = j.at("params");
  for (const ParamRef& p : collect_params(ck.params)) {
    const auto& entry = tensors.at(p.name);
    const auto shape = entry.at("shape").get<std::vector<int>>();
    if (shape != p.tensor.shape()) {
      throw UserError("checkpoint tensor '" + p.name + "' has shape " + ad::shape_string(shape) +
                      ", expected " + ad::shape_string(p.tensor.shape()));
    }
    p.tensor.data() = entry.at("data").get<std::vector<double>>();
  }
  const auto& norms = j.at("batch_norms");
  for (const BatchNormRef& b : collect_batchnorms(ck.params)) {
    const auto& entry = norms.at(b.name);
    b.state->running_mean = entry.at("running_mean").get<std::vector<double>>();
    b.state->running_var = entry.at("running_var").get<std::vector<double>>();
    b.state->momentum = entry.at("momentum").get<double>();
    b.state->eps = entry.at("eps").get<double>();
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, WideDeepParams& params,
                     const WideDeepConfig& config, const TabularEncoder& encoder) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write checkpoint file " + path.string());
  out << checkpoint_to_json(params, config, encoder).dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open checkpoint file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UserError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw UserError("incomplete checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace shapesurv
