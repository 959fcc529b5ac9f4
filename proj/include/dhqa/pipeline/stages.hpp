#pragma once

#include <Eigen/Core>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "dhqa/distortion/grid.hpp"
#include "dhqa/evaluation.hpp"
#include "dhqa/image_io.hpp"
#include "dhqa/mesh_io.hpp"
#include "dhqa/metrics/image_metrics.hpp"
#include "dhqa/metrics/point_cloud.hpp"
#include "dhqa/model/serialize.hpp"
#include "dhqa/model/train.hpp"
#include "dhqa/pipeline/manifest.hpp"
#include "dhqa/render.hpp"
#include "dhqa/subjective.hpp"
#include "dhqa/synthetic.hpp"

// One function per CLI subcommand. Each stage writes into its own output
// directory, lists every file it wrote in `<out>/manifest.json`, and finds
// its inputs through the manifests of earlier stages.

namespace dhqa::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kManifestName = "manifest.json";

/// Progress sink; stages call it once per unit of work.
using Progress = std::function<void(const std::string&)>;

namespace detail {

inline void report(const Progress& p, const std::string& msg) {
  if (p) p(msg);
}

inline fs::path absolute_input(const fs::path& p) { return fs::absolute(resolve(p)).lexically_normal(); }

inline fs::path prepare_out_dir(const fs::path& out) {
  const auto dir = resolve(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

struct Loaded {
  RunManifest manifest;
  fs::path dir;  ///< artifact paths are relative to this
};

inline Loaded load_stage(const fs::path& manifest_path, const std::string& stage) {
  const auto path = absolute_input(manifest_path);
  if (!fs::exists(path)) throw IoError("missing upstream manifest " + path.string());
  auto m = read_manifest(path);
  expect_stage(m, stage, path);
  return {std::move(m), path.parent_path()};
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline void finish(RunManifest& m, const fs::path& dir) {
  m.created = utc_timestamp();
  write_manifest(m, dir / kManifestName);
}

}  // namespace detail

// ---- synth ----

struct SynthConfig {
  fs::path out_dir;
  int count = 2;
  std::uint64_t seed = 0;
  SyntheticHeadConfig head;
};

/// Writes `count` synthetic textured heads `head00.obj`, ... with PNG textures.
inline RunManifest cmd_synth(const SynthConfig& cfg, const Progress& progress = {}) {
  if (cfg.count < 1) throw InvalidArgument("synth: count must be >= 1");
  const auto dir = detail::prepare_out_dir(cfg.out_dir);
  RunManifest m;
  m.stage = "synth";
  m.config = {{"count", cfg.count},
              {"seed", cfg.seed},
              {"rings", cfg.head.rings},
              {"segments", cfg.head.segments},
              {"texture_size", cfg.head.texture_size},
              {"neck_cut", cfg.head.neck_cut}};
  for (int i = 0; i < cfg.count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "head%02d", i);
    const auto mesh = make_synthetic_head(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)), cfg.head);
    save_mesh(mesh, dir / (std::string(id) + ".obj"), ".png");
    m.outputs.push_back({std::string(id) + ".obj", "mesh", id, id, "reference", "", ""});
    m.outputs.push_back({std::string(id) + ".mtl", "material", id, id, "reference", "", ""});
    m.outputs.push_back({std::string(id) + ".png", "texture", id, id, "reference", "", ""});
    detail::report(progress, std::string("synth ") + id);
  }
  detail::finish(m, dir);
  return m;
}

// ---- distort ----

struct DistortConfig {
  std::vector<fs::path> references;  ///< OBJ files; the file stem is the reference id
  fs::path out_dir;
  std::uint64_t seed = 0;
  double sigma_scale = distortion::DistortionOptions{}.sigma_scale;
};

inline nlohmann::json to_json(const distortion::DistortionSpec& s) {
  return {{"family", std::string(distortion::code(s.family))}, {"level", s.level}, {"value", s.value}, {"seed", s.seed}};
}

/// Reference meshes recorded in a distort manifest, id -> absolute path.
inline std::map<std::string, fs::path> manifest_references(const RunManifest& m) {
  std::map<std::string, fs::path> out;
  for (const auto& r : m.config.at("references")) out[r.at("id")] = fs::path(r.at("path").get<std::string>());
  return out;
}

/// Loads every reference, then writes the full distortion grid as
/// `meshes/<stimulus>.obj` with PNG textures.
inline RunManifest cmd_distort(const DistortConfig& cfg, const Progress& progress = {}) {
  if (cfg.references.empty()) throw InvalidArgument("distort: no reference meshes given");
  std::vector<distortion::NamedMesh> refs;
  nlohmann::json ref_json = nlohmann::json::array();
  std::set<std::string> ids;
  for (const auto& p : cfg.references) {
    const auto path = detail::absolute_input(p);
    const auto id = path.stem().string();
    if (!ids.insert(id).second) throw InvalidArgument("distort: duplicate reference id " + id);
    if (id.find("__") != std::string::npos || id.find_first_of(",\"") != std::string::npos)
      throw InvalidArgument("distort: reference id " + id + " may not contain '__', commas or quotes");
    try {
      refs.push_back({id, load_mesh(path)});
    } catch (const Error& e) {
      throw IoError("reference " + id + ": " + e.what());
    }
    ref_json.push_back({{"id", id}, {"path", path.string()}});
    detail::report(progress, "loaded reference " + id);
  }
  const auto dir = detail::prepare_out_dir(cfg.out_dir);
  fs::create_directories(dir / "meshes");

  RunManifest m;
  m.stage = "distort";
  m.config = {{"seed", cfg.seed}, {"sigma_scale", cfg.sigma_scale}, {"references", ref_json}};
  for (const auto& r : ref_json) m.inputs.push_back(r.at("path"));
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& ref : refs) {
    for (const auto& spec : distortion::grid_specs(cfg.seed, ref.id)) {
      const auto sid = distortion::stimulus_id(ref.id, spec);
      const auto mesh = distortion::apply(ref.mesh, spec, {cfg.sigma_scale});
      save_mesh(mesh, dir / "meshes" / (sid + ".obj"), ".png");
      const auto tag = spec.tag();
      m.outputs.push_back({"meshes/" + sid + ".obj", "mesh", sid, ref.id, "distorted", "", tag});
      m.outputs.push_back({"meshes/" + sid + ".mtl", "material", sid, ref.id, "distorted", "", tag});
      m.outputs.push_back({"meshes/" + sid + ".png", "texture", sid, ref.id, "distorted", "", tag});
      auto sj = to_json(spec);
      sj["stimulus_id"] = sid;
      sj["reference_id"] = ref.id;
      grid.push_back(std::move(sj));
      detail::report(progress, "distort " + sid);
    }
  }
  m.config["grid"] = std::move(grid);
  detail::finish(m, dir);
  return m;
}

// ---- render ----

struct RenderConfig {
  fs::path distort_manifest;
  fs::path out_dir;
  int width = render::Camera{}.width;
  int height = render::Camera{}.height;
  std::vector<render::View> views{render::View::Front, render::View::Left};
};

/// Renders every reference and distorted mesh from each view, distorted
/// meshes framed by their reference. A mesh that fails to load or render
/// is recorded in `errors` with its stimulus id and the rest continue.
inline RunManifest cmd_render(const RenderConfig& cfg, const Progress& progress = {}) {
  if (cfg.views.empty()) throw InvalidArgument("render: no views requested");
  const render::Camera probe{render::View::Front, cfg.width, cfg.height};
  probe.validate();
  const auto up = detail::load_stage(cfg.distort_manifest, "distort");
  const auto references = manifest_references(up.manifest);
  const auto dir = detail::prepare_out_dir(cfg.out_dir);
  fs::create_directories(dir / "images");

  RunManifest m;
  m.stage = "render";
  nlohmann::json views = nlohmann::json::array();
  for (auto v : cfg.views) views.push_back(render::view_name(v));
  const auto upstream = detail::absolute_input(cfg.distort_manifest).string();
  m.config = {{"distort_manifest", upstream}, {"width", cfg.width}, {"height", cfg.height}, {"views", views}};
  m.inputs.push_back(upstream);

  std::map<std::string, std::vector<const Artifact*>> by_ref;
  for (const auto& a : up.manifest.outputs)
    if (a.kind == "mesh") by_ref[a.reference_id].push_back(&a);

  auto emit = [&](const TextureImage& img, const std::string& sid, const std::string& ref, const std::string& role,
                  render::View v, const std::string& spec) {
    const auto name = "images/" + sid + "_" + render::view_name(v) + ".png";
    write_png(img, dir / name);
    m.outputs.push_back({name, "image", sid, ref, role, render::view_name(v), spec});
  };

  for (const auto& [ref_id, ref_path] : references) {
    std::optional<TexturedMesh> ref;
    try {
      ref = load_mesh(ref_path);
      for (auto v : cfg.views) emit(render::render(*ref, {v, cfg.width, cfg.height}).image, ref_id, ref_id, "reference", v, "");
      detail::report(progress, "render " + ref_id);
    } catch (const Error& e) {
      m.errors.push_back(ref_id + ": " + e.what());
      detail::report(progress, "FAILED " + ref_id + ": " + e.what());
      for (const auto* a : by_ref[ref_id]) m.errors.push_back(a->stimulus_id + ": reference " + ref_id + " unavailable");
      continue;
    }
    const auto framing = render::framing_for(*ref);
    for (const auto* a : by_ref[ref_id]) {
      try {
        const auto mesh = load_mesh(up.dir / a->path);
        std::vector<TextureImage> images;
        for (auto v : cfg.views) images.push_back(render::render(mesh, {v, cfg.width, cfg.height}, {}, framing).image);
        for (std::size_t i = 0; i < cfg.views.size(); ++i)
          emit(images[i], a->stimulus_id, ref_id, "distorted", cfg.views[i], a->spec);
        detail::report(progress, "render " + a->stimulus_id);
      } catch (const Error& e) {
        m.errors.push_back(a->stimulus_id + ": " + e.what());
        detail::report(progress, "FAILED " + a->stimulus_id + ": " + e.what());
      }
    }
  }
  detail::finish(m, dir);
  return m;
}

/// Image path per (stimulus id, view) from a render manifest.
inline std::map<std::pair<std::string, std::string>, fs::path> manifest_images(const RunManifest& m, const fs::path& dir) {
  std::map<std::pair<std::string, std::string>, fs::path> out;
  for (const auto& a : m.outputs)
    if (a.kind == "image") out[{a.stimulus_id, a.view}] = dir / a.path;
  return out;
}

// ---- metrics ----

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"psnr", "ssim", "ms_ssim", "gmsd", "p2point_mse", "p2plane_mse", "psnr_yuv"};
  return names;
}

struct MetricsConfig {
  fs::path render_manifest;
  fs::path out_dir;
  std::size_t points = 200000;  ///< per mesh, for the point-cloud metrics
  std::uint64_t seed = 0;
  std::string view = "front";   ///< projection used by the image metrics
};

inline constexpr const char* kMetricsHeader = "stimulus_id,metric,value";

/// Seven classic metrics per distorted stimulus, written to `metrics.csv`
/// as one `stimulus_id,metric,value` row each.
inline RunManifest cmd_metrics(const MetricsConfig& cfg, const Progress& progress = {}) {
  if (cfg.points < 13) throw InvalidArgument("metrics: need at least 13 points per cloud");
  const auto rend = detail::load_stage(cfg.render_manifest, "render");
  const auto dist = detail::load_stage(rend.manifest.config.at("distort_manifest").get<std::string>(), "distort");
  const auto references = manifest_references(dist.manifest);
  const auto images = manifest_images(rend.manifest, rend.dir);
  const auto dir = detail::prepare_out_dir(cfg.out_dir);

  RunManifest m;
  m.stage = "metrics";
  const auto upstream = detail::absolute_input(cfg.render_manifest).string();
  m.config = {{"render_manifest", upstream}, {"points", cfg.points}, {"seed", cfg.seed}, {"view", cfg.view},
              {"metrics", metric_names()}};
  m.inputs = {upstream, rend.manifest.config.at("distort_manifest").get<std::string>()};

  std::string csv = std::string(kMetricsHeader) + "\n";
  std::map<std::string, metrics::ColoredPointCloud> ref_clouds;
  for (const auto& a : dist.manifest.outputs) {
    if (a.kind != "mesh") continue;
    const auto& sid = a.stimulus_id;
    try {
      const auto ri = images.find({a.reference_id, cfg.view}), di = images.find({sid, cfg.view});
      if (ri == images.end() || di == images.end())
        throw IoError("no " + cfg.view + " projection in the render manifest");
      const auto ref_img = read_png(ri->second), dist_img = read_png(di->second);
      auto rc = ref_clouds.find(a.reference_id);
      if (rc == ref_clouds.end()) {
        const auto ref_mesh = load_mesh(references.at(a.reference_id));
        rc = ref_clouds
                 .emplace(a.reference_id,
                          metrics::sample_point_cloud(ref_mesh, cfg.points, derive_seed(cfg.seed, hash_string(a.reference_id))))
                 .first;
      }
      const auto cloud = metrics::sample_point_cloud(load_mesh(dist.dir / a.path), cfg.points, derive_seed(cfg.seed, hash_string(sid)));
      const double values[] = {metrics::psnr(ref_img, dist_img),          metrics::ssim(ref_img, dist_img),
                               metrics::ms_ssim(ref_img, dist_img),       metrics::gmsd(ref_img, dist_img),
                               metrics::p2point_mse(rc->second, cloud),   metrics::p2plane_mse(rc->second, cloud),
                               metrics::psnr_yuv(rc->second, cloud)};
      for (std::size_t k = 0; k < metric_names().size(); ++k)
        csv += sid + "," + metric_names()[k] + "," + detail::fmt(values[k]) + "\n";
      detail::report(progress, "metrics " + sid);
    } catch (const Error& e) {
      m.errors.push_back(sid + ": " + e.what());
      detail::report(progress, "FAILED " + sid + ": " + e.what());
    }
  }
  detail::write_text(dir / "metrics.csv", csv);
  m.outputs.push_back({"metrics.csv", "csv", "", "", "", "", ""});
  detail::finish(m, dir);
  return m;
}

/// metric -> stimulus -> value
using MetricTable = std::map<std::string, std::map<std::string, double>>;

inline MetricTable read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file " + path.string());
  MetricTable t;
  int row = 1;
  for (const auto& c : subjective::detail::read_csv_rows(in, kMetricsHeader, "metrics")) {
    const auto where = "metrics row " + std::to_string(++row);
    if (!t[c[1]].emplace(c[0], subjective::detail::parse_double(c[2], where)).second)
      throw FormatError("duplicate " + c[1] + " value for " + c[0] + " at " + where);
  }
  return t;
}

// ---- mos ----

struct MosConfig {
  fs::path ratings;
  fs::path out_dir;
  bool screen = true;
  subjective::RescaleMode rescale = subjective::RescaleMode::Global;
  double scale_min = 0.0;
  double scale_max = 100.0;
};

/// Ratings CSV to `mos.csv`, with the subject exclusions and screening
/// outcome in `screening.json`.
inline RunManifest cmd_mos(const MosConfig& cfg, const Progress& progress = {}) {
  const auto input = detail::absolute_input(cfg.ratings);
  const auto table = subjective::read_ratings_csv(input, cfg.scale_min, cfg.scale_max);
  detail::report(progress, "read " + std::to_string(table.size()) + " ratings from " + std::to_string(table.subjects().size()) + " subjects");
  const auto rep = subjective::derive_mos(table, {cfg.screen, cfg.rescale});
  const auto dir = detail::prepare_out_dir(cfg.out_dir);

  std::ostringstream csv;
  subjective::write_mos_csv(rep.mos, csv);
  detail::write_text(dir / "mos.csv", csv.str());

  nlohmann::json excluded = nlohmann::json::array();
  for (const auto& e : rep.excluded) excluded.push_back({{"subject_id", e.subject_id}, {"reason", e.reason}});
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& s : rep.screening.report)
    subjects.push_back({{"subject_id", s.subject_id}, {"p", s.p}, {"q", s.q}, {"n", s.n}, {"rejected", s.rejected}});
  const nlohmann::json screening{{"excluded", excluded},
                                 {"screening", subjects},
                                 {"kept", rep.screening.kept},
                                 {"rejected", rep.screening.rejected}};
  detail::write_text(dir / "screening.json", screening.dump(2) + "\n");
  detail::report(progress, "MOS for " + std::to_string(rep.mos.size()) + " stimuli; " +
                               std::to_string(rep.screening.rejected.size()) + " subjects rejected");

  RunManifest m;
  m.stage = "mos";
  m.config = {{"ratings", input.string()},
              {"screen", cfg.screen},
              {"rescale", cfg.rescale == subjective::RescaleMode::Global ? "global" : "session"},
              {"scale_min", cfg.scale_min},
              {"scale_max", cfg.scale_max}};
  m.inputs = {input.string()};
  m.outputs = {{"mos.csv", "csv", "", "", "", "", ""}, {"screening.json", "json", "", "", "", "", ""}};
  detail::finish(m, dir);
  return m;
}

inline std::map<std::string, double> mos_values(const subjective::MosTable& t) {
  std::map<std::string, double> out;
  for (const auto& [id, e] : t) out[id] = e.mos;
  return out;
}

// ---- train ----

struct TrainCommandConfig {
  fs::path render_manifest;
  fs::path mos;  ///< MOS CSV
  fs::path out_dir;
  std::string view = "front";
  model::EncoderConfig encoder;
  model::FusionConfig fusion;
  model::TrainConfig train;
  std::uint64_t model_seed = 0;
  int folds = 0;  ///< 0 trains one model on everything; k >= 2 runs content-disjoint k-fold CV
  std::uint64_t fold_seed = 0;
};

/// Samples for every distorted stimulus that has a MOS. A MOS entry without
/// a rendered projection is an error.
inline std::vector<model::Sample> load_dataset(const fs::path& render_manifest, const subjective::MosTable& mos,
                                               const std::string& view, const model::TrainConfig& tc) {
  const auto rend = detail::load_stage(render_manifest, "render");
  const auto images = manifest_images(rend.manifest, rend.dir);
  std::map<std::string, std::string> ref_of;
  for (const auto& a : rend.manifest.outputs)
    if (a.kind == "image" && a.role == "distorted") ref_of[a.stimulus_id] = a.reference_id;
  std::map<std::string, model::FloatImage> ref_cache;
  std::vector<model::Sample> out;
  for (const auto& [sid, e] : mos) {
    const auto r = ref_of.find(sid);
    if (r == ref_of.end()) throw IoError("no rendered projection for MOS stimulus " + sid);
    const auto ri = images.find({r->second, view}), di = images.find({sid, view});
    if (ri == images.end() || di == images.end()) throw IoError("no " + view + " projection for " + sid);
    auto rc = ref_cache.find(r->second);
    if (rc == ref_cache.end()) rc = ref_cache.emplace(r->second, model::prepare_image(read_png(ri->second), tc)).first;
    out.push_back({sid, rc->second, model::prepare_image(read_png(di->second), tc), e.mos});
  }
  if (out.empty()) throw InvalidArgument("train: no stimuli with both MOS and projections");
  return out;
}

inline nlohmann::json to_json(const model::TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"beta1", t.beta1},   {"beta2", t.beta2},
          {"epsilon", t.epsilon},             {"epochs", t.epochs}, {"batch_size", t.batch_size},
          {"resize_width", t.resize_width},   {"resize_height", t.resize_height},
          {"crop", t.crop},                   {"seed", t.seed},     {"freeze_encoder", t.freeze_encoder}};
}

struct TrainOutcome {
  RunManifest manifest;
  std::optional<eval::EvalReport> report;  ///< CV only
};

/// With `folds == 0`: trains on every sample, writes `model.bin` and
/// `loss.csv`. With k folds: trains one fresh model per fold on the
/// training contents, writes `predictions.csv`, `loss.csv` and `eval.json`.
/// Each fold's model predicts every stimulus so the logistic map is fitted
/// on that fold's own training predictions.
inline TrainOutcome cmd_train(const TrainCommandConfig& cfg, const Progress& progress = {}) {
  cfg.encoder.validate();
  cfg.train.validate();
  if (cfg.folds == 1 || cfg.folds < 0) throw InvalidArgument("train: folds must be 0 or >= 2");
  const auto mos_path = detail::absolute_input(cfg.mos);
  const auto mos = subjective::read_mos_csv(mos_path);
  const auto data = load_dataset(cfg.render_manifest, mos, cfg.view, cfg.train);
  const auto dir = detail::prepare_out_dir(cfg.out_dir);

  RunManifest m;
  m.stage = "train";
  const auto upstream = detail::absolute_input(cfg.render_manifest).string();
  m.config = {{"render_manifest", upstream},
              {"mos", mos_path.string()},
              {"view", cfg.view},
              {"encoder", model::to_json(cfg.encoder)},
              {"fusion", model::to_json(cfg.fusion)},
              {"train", to_json(cfg.train)},
              {"model_seed", cfg.model_seed},
              {"folds", cfg.folds},
              {"fold_seed", cfg.fold_seed},
              {"threads", Eigen::nbThreads()}};
  m.inputs = {upstream, mos_path.string()};

  std::string loss_csv = "fold,epoch,loss\n";
  auto run = [&](const std::vector<model::Sample>& subset, const std::string& fold_name) {
    auto net = std::make_unique<model::Model>(cfg.encoder, cfg.fusion, cfg.model_seed);
    model::train(*net, subset, cfg.train, [&](int epoch, double loss) {
      loss_csv += fold_name + "," + std::to_string(epoch + 1) + "," + detail::fmt(loss) + "\n";
      detail::report(progress, "fold " + fold_name + " epoch " + std::to_string(epoch + 1) + " loss " + detail::fmt(loss));
    });
    return net;
  };

  TrainOutcome result;
  if (cfg.folds == 0) {
    const auto net = run(data, "all");
    model::save_model(*net, dir / "model.bin");
    m.outputs.push_back({"model.bin", "model", "", "", "", "", ""});
  } else {
    std::map<std::string, std::string> content_of;
    std::set<std::string> contents;
    for (const auto& s : data) contents.insert(content_of[s.id] = distortion::content_of(s.id));
    const auto folds = eval::make_folds({contents.begin(), contents.end()}, cfg.folds, cfg.fold_seed);
    std::vector<std::map<std::string, double>> scores(folds.size());
    std::string pred_csv = "fold,stimulus_id,prediction\n";
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const std::set<std::string> train_c(folds[f].train.begin(), folds[f].train.end());
      std::vector<model::Sample> subset;
      for (const auto& s : data)
        if (train_c.count(content_of[s.id])) subset.push_back(s);
      const auto net = run(subset, std::to_string(f));
      for (const auto& s : data) {
        const double p = model::predict(*net, s);
        scores[f][s.id] = p;
        pred_csv += std::to_string(f) + "," + s.id + "," + detail::fmt(p) + "\n";
      }
    }
    result.report = eval::evaluate_per_fold("model", scores, mos_values(mos), content_of, folds);
    detail::write_text(dir / "predictions.csv", pred_csv);
    detail::write_text(dir / "eval.json", eval::to_json(*result.report).dump(2) + "\n");
    m.outputs.push_back({"predictions.csv", "csv", "", "", "", "", ""});
    m.outputs.push_back({"eval.json", "json", "", "", "", "", ""});
  }
  detail::write_text(dir / "loss.csv", loss_csv);
  m.outputs.push_back({"loss.csv", "csv", "", "", "", "", ""});
  detail::finish(m, dir);
  result.manifest = std::move(m);
  return result;
}

// ---- eval ----

struct EvalConfig {
  fs::path metrics;  ///< metrics CSV
  fs::path mos;      ///< MOS CSV
  fs::path out_dir;
  int folds = 5;
  std::uint64_t seed = 0;
};

struct EvalOutcome {
  RunManifest manifest;
  std::vector<eval::EvalReport> reports;
  std::string table;
};

/// Content-disjoint k-fold evaluation of every metric in a metrics CSV.
/// Writes `eval.json` and the text table `eval.txt`.
inline EvalOutcome cmd_eval(const EvalConfig& cfg, const Progress& progress = {}) {
  const auto metrics_path = detail::absolute_input(cfg.metrics), mos_path = detail::absolute_input(cfg.mos);
  const auto table = read_metrics_csv(metrics_path);
  const auto mos = mos_values(subjective::read_mos_csv(mos_path));
  if (table.empty()) throw InvalidArgument("eval: metrics file has no rows");

  std::map<std::string, std::string> content_of;
  std::set<std::string> contents;
  for (const auto& [sid, v] : mos) contents.insert(content_of[sid] = distortion::content_of(sid));
  const auto folds = eval::make_folds({contents.begin(), contents.end()}, cfg.folds, cfg.seed);

  EvalOutcome out;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [metric, scores] : table) {
    out.reports.push_back(eval::evaluate_method(metric, scores, mos, content_of, folds));
    j.push_back(eval::to_json(out.reports.back()));
    detail::report(progress, "evaluated " + metric);
  }
  out.table = eval::format_table(out.reports);
  const auto dir = detail::prepare_out_dir(cfg.out_dir);
  detail::write_text(dir / "eval.json", j.dump(2) + "\n");
  detail::write_text(dir / "eval.txt", out.table);

  auto& m = out.manifest;
  m.stage = "eval";
  m.config = {{"metrics", metrics_path.string()}, {"mos", mos_path.string()}, {"folds", cfg.folds}, {"seed", cfg.seed}};
  m.inputs = {metrics_path.string(), mos_path.string()};
  m.outputs = {{"eval.json", "json", "", "", "", "", ""}, {"eval.txt", "text", "", "", "", "", ""}};
  detail::finish(m, dir);
  return out;
}

}  // namespace dhqa::pipeline
