#include "meshnet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "meshnet/checkpoint.hpp"
#include "meshnet/error.hpp"

#ifndef MESHNET_BUILD_ID
#define MESHNET_BUILD_ID "unknown"
#endif

namespace meshnet {

std::string_view build_id() { return MESHNET_BUILD_ID; }

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Data

Mesh segmentation_template(const DataConfig& data, std::uint64_t seed) {
  const Mesh sphere = make_icosphere(data.subdivisions);
  std::mt19937_64 rng(derive_seed(seed, "template"));
  std::uniform_real_distribution<double> bump(-1.0, 1.0);
  std::vector<Vec3> pos;
  pos.reserve(sphere.vertex_count());
  for (const Vec3& p : sphere.vertices()) pos.push_back(p * (1.0 + data.template_noise * bump(rng)));
  return sphere.with_positions(std::move(pos));
}

Mesh jittered(const Mesh& mesh, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
  std::vector<Vec3> pos;
  pos.reserve(mesh.vertex_count());
  for (const Vec3& p : mesh.vertices()) {
    pos.push_back(sigma > 0.0 ? Vec3(p + Vec3(noise(rng), noise(rng), noise(rng))) : p);
  }
  return mesh.with_positions(std::move(pos));
}

namespace {

std::vector<std::size_t> identity_labels(std::size_t n) {
  std::vector<std::size_t> labels(n);
  std::iota(labels.begin(), labels.end(), std::size_t{0});
  return labels;
}

Mesh classification_mesh(const DataConfig& data, std::size_t label, std::uint64_t seed) {
  if (label == 0) {
    const Mesh sphere = make_icosphere(data.subdivisions);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> bump(-1.0, 1.0);
    std::vector<Vec3> pos;
    for (const Vec3& p : sphere.vertices()) pos.push_back(p * (1.0 + data.template_noise * bump(rng)));
    return sphere.with_positions(std::move(pos));
  }
  return make_grid_patch(data.grid_rows, data.grid_cols, data.grid_noise, seed);
}

std::vector<Sample> synthetic_split(const RunConfig& config, int count, std::string_view tag) {
  const DataConfig& data = config.data;
  std::vector<Sample> out;
  if (data.kind == "segmentation") {
    const Mesh body = segmentation_template(data, config.seed);
    for (int k = 0; k < count; ++k) {
      const std::uint64_t s = derive_seed(config.seed, std::string(tag) + std::to_string(k));
      Mesh m = jittered(body, data.jitter, s);
      out.push_back({prepare_geometry(std::move(m)), identity_labels(body.vertex_count())});
    }
  } else if (data.kind == "classification") {
    for (int k = 0; k < count; ++k) {
      const auto label = static_cast<std::size_t>(k % 2);
      const std::uint64_t s = derive_seed(config.seed, std::string(tag) + std::to_string(k));
      out.push_back({prepare_geometry(classification_mesh(data, label, s)), {label}});
    }
  } else {
    throw Error(ErrorCode::Config, "data.kind '" + data.kind + "' has no labels");
  }
  return out;
}

}  // namespace

Dataset make_dataset(const RunConfig& config) {
  Dataset d;
  if (config.data.kind == "segmentation") {
    d.task = Task::Segmentation;
    d.classes = static_cast<int>(make_icosphere(config.data.subdivisions).vertex_count());
  } else if (config.data.kind == "classification") {
    d.task = Task::Classification;
    d.classes = 2;
  } else {
    throw Error(ErrorCode::Config, "data.kind must be segmentation or classification for training");
  }
  if (config.data.train_meshes < 0 || config.data.test_meshes < 0) {
    throw Error(ErrorCode::Config, "mesh counts must be non-negative");
  }
  d.train = synthetic_split(config, config.data.train_meshes, "train");
  d.test = synthetic_split(config, config.data.test_meshes, "test");
  return d;
}

Mesh make_configured_mesh(const MeshConfig& mesh, std::uint64_t seed) {
  if (mesh.kind == "icosphere") {
    if (mesh.subdivisions < 0) throw Error(ErrorCode::Config, "mesh.subdivisions must be >= 0");
    return make_icosphere(mesh.subdivisions);
  }
  if (mesh.kind == "grid_patch") return make_grid_patch(mesh.rows, mesh.cols, mesh.noise, seed);
  if (mesh.kind == "file") {
    if (mesh.input.empty()) throw Error(ErrorCode::Config, "mesh.kind = file needs mesh.input");
    return load_mesh(mesh.input);
  }
  throw Error(ErrorCode::Config, "unknown mesh.kind '" + mesh.kind + "'");
}

// ---------------------------------------------------------------------------
// Transformations and gaps

TransformFamily parse_transform_family(std::string_view name) {
  if (name == "gauge") return TransformFamily::Gauge;
  if (name == "rot_tr_scale") return TransformFamily::RotTrScale;
  if (name == "rotation") return TransformFamily::Rotation;
  if (name == "translation") return TransformFamily::Translation;
  if (name == "scaling") return TransformFamily::Scaling;
  if (name == "perm") return TransformFamily::Perm;
  throw Error(ErrorCode::Config, "unknown transform family '" + std::string(name) + "'");
}

std::string_view to_string(TransformFamily family) {
  switch (family) {
    case TransformFamily::Gauge: return "gauge";
    case TransformFamily::RotTrScale: return "rot_tr_scale";
    case TransformFamily::Rotation: return "rotation";
    case TransformFamily::Translation: return "translation";
    case TransformFamily::Scaling: return "scaling";
    case TransformFamily::Perm: return "perm";
  }
  return "?";
}

TransformedGeometry transform_geometry(const SurfaceGeometry& geometry, TransformFamily family,
                                       std::mt19937_64& rng, const TransformRanges& ranges) {
  const std::size_t n = geometry.mesh.vertex_count();
  switch (family) {
    case TransformFamily::Gauge: {
      const std::vector<double> angles = random_gauge(n, rng);
      return {regauge(geometry, angles), std::nullopt};
    }
    case TransformFamily::Perm: {
      Permutation perm = random_permutation(n, rng);
      return {prepare_geometry(apply_permutation(geometry.mesh, perm)), std::move(perm)};
    }
    default: break;
  }
  const AmbientTransform full = random_ambient(rng, ranges);
  AmbientTransform t;
  switch (family) {
    case TransformFamily::RotTrScale: t = full; break;
    case TransformFamily::Rotation: t = AmbientTransform::rotation_only(full.rotation); break;
    case TransformFamily::Translation: t = AmbientTransform::translation_only(full.translation); break;
    case TransformFamily::Scaling: t = AmbientTransform::scale_only(full.scale); break;
    default: break;
  }
  return {prepare_geometry(apply_ambient(geometry.mesh, t)), std::nullopt};
}

Tensor pull_back(const Tensor& logits, const TransformedGeometry& transformed, Task task) {
  if (!transformed.perm || task == Task::Classification) return logits;
  return permute_rows(logits, transformed.perm->inverted());
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "mean_squared_error: shapes differ");
  }
  if (a.size() == 0) return 0.0;
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

double equivariance_gap(const Model& model, const SurfaceGeometry& geometry,
                        TransformFamily family, std::mt19937_64& rng,
                        const TransformRanges& ranges) {
  const Tensor base = model.logits(geometry);
  const TransformedGeometry moved = transform_geometry(geometry, family, rng, ranges);
  const Tensor back = pull_back(model.logits(moved.geometry), moved, model.config().task);
  return mean_squared_error(base, back);
}

// ---------------------------------------------------------------------------
// Training and evaluation

namespace {

std::size_t argmax_row(const Tensor& logits, long row) {
  Eigen::Index best = 0;
  logits.row(row).maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

std::pair<std::size_t, std::size_t> count_correct(const Tensor& logits,
                                                  const std::vector<std::size_t>& labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += argmax_row(logits, static_cast<long>(i)) == labels[i] ? 1 : 0;
  }
  return {correct, labels.size()};
}

}  // namespace

TrainHistory train_model(Model& model, const Dataset& data, const TrainConfig& train,
                         std::uint64_t seed) {
  if (data.train.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  std::vector<GeometricFeatureField> inputs;
  inputs.reserve(data.train.size());
  for (const Sample& s : data.train) inputs.push_back(model.input_features(s.geometry));

  Adam adam(model.parameters(), train.learning_rate);
  std::mt19937_64 rng(derive_seed(seed, "train"));
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(train.batch_size);

  TrainHistory history;
  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      adam.zero_grad();
      Tape tape;
      tape.training = true;
      Var loss;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        const Var logits = model.forward(tape, inputs[i], data.train[i].geometry.transport, &rng);
        const Var l = nll_loss(logits, data.train[i].labels);
        loss = loss.valid() ? add(loss, l) : l;
      }
      loss = scale(loss, 1.0 / static_cast<double>(stop - start));
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::Divergence, "loss became non-finite at epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
      adam.step();
      epoch_loss += value * static_cast<double>(stop - start);
    }
    history.loss.push_back(epoch_loss / static_cast<double>(order.size()));
    history.train_accuracy.push_back(accuracy(model, data.train));
  }
  return history;
}

double accuracy(const Model& model, const std::vector<Sample>& samples,
                std::optional<TransformFamily> family, std::uint64_t seed,
                const TransformRanges& ranges) {
  if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "accuracy of an empty sample set");
  std::mt19937_64 rng(derive_seed(seed, family ? to_string(*family) : "plain"));
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const Sample& s : samples) {
    Tensor logits;
    if (family) {
      const TransformedGeometry moved = transform_geometry(s.geometry, *family, rng, ranges);
      logits = pull_back(model.logits(moved.geometry), moved, model.config().task);
    } else {
      logits = model.logits(s.geometry);
    }
    const auto [c, n] = count_correct(logits, s.labels);
    correct += c;
    total += n;
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

ModelConfig resolved_model_config(const RunConfig& config, int classes) {
  ModelConfig m = config.model;
  if (m.targets == 0) m.targets = classes;
  return m;
}

// ---------------------------------------------------------------------------
// Commands

nlohmann::json report_header(const RunConfig& config, std::string_view command) {
  return {{"command", command},
          {"build_id", build_id()},
          {"seed", config.seed},
          {"config_hash", config.model.hash()}};
}

nlohmann::json run_gen_mesh(const RunConfig& config) {
  if (config.mesh.output.empty()) throw Error(ErrorCode::Config, "gen-mesh needs mesh.output");
  const Mesh mesh = make_configured_mesh(config.mesh, derive_seed(config.seed, "mesh"));
  save_mesh(mesh, config.mesh.output);
  nlohmann::json out = report_header(config, "gen-mesh");
  out["output"] = config.mesh.output;
  out["vertices"] = mesh.vertex_count();
  out["faces"] = mesh.face_count();
  out["edges"] = mesh.edge_count();
  return out;
}

nlohmann::json run_features(const RunConfig& config) {
  const Mesh mesh = make_configured_mesh(config.mesh, derive_seed(config.seed, "mesh"));
  const SurfaceGeometry geo = prepare_geometry(mesh);
  const GeometricFeatureField f =
      compute_features(config.model.features, geo.mesh, geo.frames, config.model.reltan);
  nlohmann::json rows = nlohmann::json::array();
  for (long r = 0; r < f.values.rows(); ++r) {
    rows.push_back(std::vector<double>(f.values.row(r).data(), f.values.row(r).data() + f.values.cols()));
  }
  nlohmann::json out = report_header(config, "features");
  out["family"] = to_string(config.model.features);
  out["type"] = f.type.to_string();
  out["vertices"] = mesh.vertex_count();
  out["values"] = std::move(rows);
  return out;
}

nlohmann::json run_eqgap(const RunConfig& config) {
  std::vector<SurfaceGeometry> meshes;
  int classes = 0;
  if (config.data.kind == "files") {
    if (config.data.files.empty()) throw Error(ErrorCode::EmptyDataset, "data.files is empty");
    for (const std::string& path : config.data.files) meshes.push_back(prepare_geometry(load_mesh(path)));
    classes = 8;
  } else {
    RunConfig c = config;
    c.data.train_meshes = config.eqgap.meshes;
    c.data.test_meshes = 0;
    Dataset d = make_dataset(c);
    classes = d.classes;
    for (Sample& s : d.train) meshes.push_back(std::move(s.geometry));
  }
  const ModelConfig mc = resolved_model_config(config, classes);
  const Model model(mc, derive_seed(config.seed, "model"));

  nlohmann::json families = nlohmann::json::object();
  for (const std::string& name : config.eqgap.families) {
    const TransformFamily family = parse_transform_family(name);
    std::mt19937_64 rng(derive_seed(config.seed, "eqgap." + name));
    double total = 0.0;
    for (const SurfaceGeometry& g : meshes) total += equivariance_gap(model, g, family, rng, config.transforms);
    families[name] = total / static_cast<double>(meshes.size());
  }
  nlohmann::json out = report_header(config, "eqgap");
  out["config_hash"] = mc.hash();
  out["layer"] = to_string(mc.layer);
  out["features"] = to_string(mc.features);
  out["bias"] = to_string(mc.bias);
  out["meshes"] = meshes.size();
  out["mse"] = std::move(families);
  return out;
}

nlohmann::json run_train(const RunConfig& config) {
  const Dataset data = make_dataset(config);
  const ModelConfig mc = resolved_model_config(config, data.classes);
  Model model(mc, derive_seed(config.seed, "model"));
  const TrainHistory history = train_model(model, data, config.train, config.seed);
  if (!config.train.checkpoint.empty()) save_checkpoint(model, config.train.checkpoint);

  nlohmann::json out = report_header(config, "train");
  out["config_hash"] = mc.hash();
  out["epochs"] = config.train.epochs;
  out["loss"] = history.loss;
  out["train_accuracy"] = history.train_accuracy;
  out["final_train_accuracy"] = history.train_accuracy.empty() ? accuracy(model, data.train)
                                                                : history.train_accuracy.back();
  if (!data.test.empty()) out["test_accuracy"] = accuracy(model, data.test);
  out["checkpoint"] = config.train.checkpoint;
  return out;
}

nlohmann::json run_eval(const RunConfig& config) {
  const Dataset data = make_dataset(config);
  if (data.test.empty()) throw Error(ErrorCode::EmptyDataset, "test set is empty");
  const ModelConfig mc = resolved_model_config(config, data.classes);
  Model model(mc, derive_seed(config.seed, "model"));
  load_checkpoint(model, config.eval.checkpoint);

  nlohmann::json acc = nlohmann::json::object();
  if (!data.train.empty()) acc["train"] = accuracy(model, data.train);
  acc["test"] = accuracy(model, data.test);
  for (const std::string& name : config.eval.families) {
    acc[name] = accuracy(model, data.test, parse_transform_family(name),
                         derive_seed(config.seed, "eval"), config.transforms);
  }
  nlohmann::json out = report_header(config, "eval");
  out["config_hash"] = mc.hash();
  out["checkpoint"] = config.eval.checkpoint;
  out["accuracy"] = std::move(acc);
  return out;
}

LayerTiming time_layer(const RunConfig& config, LayerKind kind, int rows, int cols) {
  const SurfaceGeometry geo =
      prepare_geometry(make_grid_patch(rows, cols, 0.1, derive_seed(config.seed, "time.mesh")));
  const FeatureType& type = config.model.hidden_type;
  std::mt19937_64 rng(derive_seed(config.seed, "time.layer"));
  std::unique_ptr<MeshLayer> layer;
  if (kind == LayerKind::Gem) {
    layer = std::make_unique<GemConvLayer>(type, type, config.model.bias, rng);
  } else {
    EmanOptions opt;
    opt.attention_type = config.model.attention_type.value_or(type);
    opt.self_contribution = config.model.self_contribution;
    opt.heads = config.model.heads;
    opt.head_type = config.model.head_type;
    opt.bias = config.model.bias;
    layer = std::make_unique<EmanAttentionLayer>(type, type, opt, rng);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor x(static_cast<long>(geo.mesh.vertex_count()), static_cast<long>(type.dim()));
  for (long i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);

  auto run_once = [&] {
    Tape tape;
    const Var y = layer->forward(tape, tape.constant(x), geo.transport);
    tape.backward(sum(y));
  };
  for (int i = 0; i < config.time.warmup; ++i) run_once();
  std::vector<double> samples;
  for (int i = 0; i < config.time.repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run_once();
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::nth_element(samples.begin(), samples.begin() + static_cast<long>(samples.size() / 2), samples.end());
  return {samples[samples.size() / 2], geo.transport.edge_count()};
}

nlohmann::json run_time(const RunConfig& config) {
  nlohmann::json layers = nlohmann::json::object();
  std::map<std::string, double> base;
  for (const std::string& name : parse_string_list(config.time.layers)) {
    const LayerKind kind = parse_layer_kind(name);
    const LayerTiming small = time_layer(config, kind, config.time.rows, config.time.cols);
    const LayerTiming large = time_layer(config, kind, config.time.rows, 2 * config.time.cols);
    base[name] = small.median_seconds;
    layers[name] = {{"median_seconds", small.median_seconds},
                    {"edges", small.edges},
                    {"doubled_median_seconds", large.median_seconds},
                    {"doubled_edges", large.edges},
                    {"scaling_ratio", large.median_seconds / small.median_seconds}};
  }
  // Zero-layer baseline: tape setup and a trivial backward only.
  std::vector<double> samples;
  for (int i = 0; i < config.time.repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Tape tape;
    tape.backward(sum(tape.constant(Tensor::Zero(1, 1))));
    samples.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(samples.begin(), samples.end());

  nlohmann::json out = report_header(config, "time");
  out["config_hash"] = config.model.hash();
  out["type"] = config.model.hidden_type.to_string();
  out["repetitions"] = config.time.repetitions;
  out["warmup"] = config.time.warmup;
  out["layers"] = std::move(layers);
  out["baseline_seconds"] = samples[samples.size() / 2];
  if (base.count("gem") && base.count("eman")) out["eman_over_gem"] = base["eman"] / base["gem"];
  return out;
}

}  // namespace meshnet
