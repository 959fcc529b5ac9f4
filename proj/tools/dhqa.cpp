// dhqa: command-line front end for the quality-assessment pipeline.
//
// Exit status: 0 on success, 1 on a fatal error, 2 when a stage finished
// but recorded per-item errors in its manifest.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dhqa/pipeline/rating_service.hpp"
#include "dhqa/pipeline/stages.hpp"

namespace {

namespace dp = dhqa::pipeline;

int exit_status(const dp::RunManifest& m) {
  for (const auto& e : m.errors) std::cerr << "error: " << e << '\n';
  return m.errors.empty() ? 0 : 2;
}

dhqa::render::View parse_view(const std::string& s) {
  if (s == "front") return dhqa::render::View::Front;
  if (s == "left") return dhqa::render::View::Left;
  throw dhqa::InvalidArgument("unknown view " + s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital-human quality assessment pipeline"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");
  app.set_version_flag("--version", dp::kToolVersion);
  app.footer(std::string("Relative paths are resolved against $") + dp::kDataRootEnv + " when it is set.");

  dp::Progress progress = [&quiet](const std::string& msg) {
    if (!quiet) std::cerr << msg << '\n';
  };
  int status = 0;

  // synth
  dp::SynthConfig synth;
  auto* c_synth = app.add_subcommand("synth", "Write synthetic textured head meshes");
  c_synth->add_option("-o,--out", synth.out_dir, "Output directory")->required();
  c_synth->add_option("-n,--count", synth.count, "Number of heads")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  c_synth->add_option("--rings", synth.head.rings, "Latitude rings")->capture_default_str();
  c_synth->add_option("--segments", synth.head.segments, "Longitude segments")->capture_default_str();
  c_synth->add_option("--texture-size", synth.head.texture_size, "Texture side in pixels")->capture_default_str();
  c_synth->callback([&] { status = exit_status(dp::cmd_synth(synth, progress)); });

  // distort
  dp::DistortConfig distort;
  auto* c_distort = app.add_subcommand("distort", "Generate the 7-family x 4-level distortion grid");
  c_distort->add_option("references", distort.references, "Reference OBJ files")->required();
  c_distort->add_option("-o,--out", distort.out_dir, "Output directory")->required();
  c_distort->add_option("--seed", distort.seed, "Master seed for the noise families")->capture_default_str();
  c_distort->add_option("--sigma-scale", distort.sigma_scale, "Geometry-noise std per unit level, as a fraction of the bbox diagonal")
      ->capture_default_str();
  c_distort->callback([&] { status = exit_status(dp::cmd_distort(distort, progress)); });

  // render
  dp::RenderConfig render;
  std::vector<std::string> views{"front", "left"};
  auto* c_render = app.add_subcommand("render", "Render reference and distorted projections");
  c_render->add_option("manifest", render.distort_manifest, "Manifest written by distort")->required();
  c_render->add_option("-o,--out", render.out_dir, "Output directory")->required();
  c_render->add_option("--width", render.width, "Image width")->capture_default_str();
  c_render->add_option("--height", render.height, "Image height")->capture_default_str();
  c_render->add_option("--views", views, "Views to render")->check(CLI::IsMember({"front", "left"}))->capture_default_str();
  c_render->callback([&] {
    render.views.clear();
    for (const auto& v : views) render.views.push_back(parse_view(v));
    status = exit_status(dp::cmd_render(render, progress));
  });

  // metrics
  dp::MetricsConfig metrics;
  auto* c_metrics = app.add_subcommand("metrics", "Compute the classic image and point-cloud metrics");
  c_metrics->add_option("manifest", metrics.render_manifest, "Manifest written by render")->required();
  c_metrics->add_option("-o,--out", metrics.out_dir, "Output directory")->required();
  c_metrics->add_option("--points", metrics.points, "Points sampled per mesh")->capture_default_str();
  c_metrics->add_option("--seed", metrics.seed, "Point-sampling seed")->capture_default_str();
  c_metrics->add_option("--view", metrics.view, "Projection used by the image metrics")
      ->check(CLI::IsMember({"front", "left"}))
      ->capture_default_str();
  c_metrics->callback([&] { status = exit_status(dp::cmd_metrics(metrics, progress)); });

  // mos
  dp::MosConfig mos;
  bool no_screen = false, per_session = false;
  auto* c_mos = app.add_subcommand("mos", "Derive MOS from raw ratings");
  c_mos->add_option("ratings", mos.ratings, "Ratings CSV")->required();
  c_mos->add_option("-o,--out", mos.out_dir, "Output directory")->required();
  c_mos->add_flag("--no-screen", no_screen, "Skip outlier-subject screening");
  c_mos->add_flag("--per-session", per_session, "Rescale within each session instead of globally");
  c_mos->add_option("--scale-min", mos.scale_min, "Lowest allowed raw score")->capture_default_str();
  c_mos->add_option("--scale-max", mos.scale_max, "Highest allowed raw score")->capture_default_str();
  c_mos->callback([&] {
    mos.screen = !no_screen;
    mos.rescale = per_session ? dhqa::subjective::RescaleMode::PerSession : dhqa::subjective::RescaleMode::Global;
    status = exit_status(dp::cmd_mos(mos, progress));
  });

  // train
  dp::TrainCommandConfig train;
  std::string tokens = "stages";
  bool no_attention = false;
  auto* c_train = app.add_subcommand("train", "Train the learned quality model, or cross-validate it");
  c_train->add_option("manifest", train.render_manifest, "Manifest written by render")->required();
  c_train->add_option("--mos", train.mos, "MOS CSV")->required();
  c_train->add_option("-o,--out", train.out_dir, "Output directory")->required();
  c_train->add_option("--view", train.view, "Projection to train on")->check(CLI::IsMember({"front", "left"}))->capture_default_str();
  c_train->add_option("--channels", train.encoder.channels, "Encoder channels in stage 1")->capture_default_str();
  c_train->add_option("--depths", train.encoder.depths, "Blocks per stage")->expected(4);
  c_train->add_option("--heads", train.encoder.heads, "Attention heads in stage 1")->capture_default_str();
  c_train->add_option("--window", train.encoder.window, "Attention window side")->capture_default_str();
  c_train->add_option("--side", train.encoder.image_side, "Encoder input side (also the crop size)")->capture_default_str();
  c_train->add_option("--fusion-width", train.fusion.width, "Fusion token width")->capture_default_str();
  c_train->add_option("--fusion-heads", train.fusion.heads, "Fusion attention heads")->capture_default_str();
  c_train->add_option("--tokens", tokens, "Fusion tokens per side")->check(CLI::IsMember({"stages", "single"}))->capture_default_str();
  c_train->add_flag("--no-attention", no_attention, "Drop the cross-attention branch");
  c_train->add_option("--hidden", train.fusion.hidden, "Regressor hidden width")->capture_default_str();
  c_train->add_option("--lr", train.train.learning_rate, "Adam learning rate")->capture_default_str();
  c_train->add_option("--epochs", train.train.epochs, "Epochs")->capture_default_str();
  c_train->add_option("--batch", train.train.batch_size, "Batch size")->capture_default_str();
  c_train->add_option("--resize-width", train.train.resize_width, "Width images are resized to")->capture_default_str();
  c_train->add_option("--resize-height", train.train.resize_height, "Height images are resized to")->capture_default_str();
  c_train->add_option("--seed", train.train.seed, "Shuffle and crop seed")->capture_default_str();
  c_train->add_option("--model-seed", train.model_seed, "Initialisation seed")->capture_default_str();
  c_train->add_flag("--freeze-encoder", train.train.freeze_encoder, "Train only the fusion head and regressor");
  c_train->add_option("--folds", train.folds, "0 trains on everything; k >= 2 runs content-disjoint k-fold CV")
      ->capture_default_str();
  c_train->add_option("--fold-seed", train.fold_seed, "Fold assignment seed")->capture_default_str();
  c_train->callback([&] {
    train.fusion.tokens = tokens == "stages" ? dhqa::model::TokenMode::Stages : dhqa::model::TokenMode::Single;
    train.fusion.attention = !no_attention;
    train.train.crop = train.encoder.image_side;
    const auto out = dp::cmd_train(train, progress);
    if (out.report) std::cout << dhqa::eval::format_table({*out.report});
    status = exit_status(out.manifest);
  });

  // eval
  dp::EvalConfig evalc;
  auto* c_eval = app.add_subcommand("eval", "Cross-validated SRCC/PLCC/KRCC/RMSE of each metric");
  c_eval->add_option("metrics", evalc.metrics, "Metrics CSV")->required();
  c_eval->add_option("--mos", evalc.mos, "MOS CSV")->required();
  c_eval->add_option("-o,--out", evalc.out_dir, "Output directory")->required();
  c_eval->add_option("--folds", evalc.folds, "Number of folds")->capture_default_str();
  c_eval->add_option("--seed", evalc.seed, "Fold assignment seed")->capture_default_str();
  c_eval->callback([&] {
    const auto out = dp::cmd_eval(evalc, progress);
    std::cout << out.table;
    status = exit_status(out.manifest);
  });

  // serve
  std::string host = "127.0.0.1", session_file;
  int port = 8080;
  auto* c_serve = app.add_subcommand("serve", "Run the rating-session HTTP service");
  c_serve->add_option("session", session_file, "Session config (JSON)")->required();
  c_serve->add_option("--host", host, "Bind address")->capture_default_str();
  c_serve->add_option("--port", port, "Port")->capture_default_str();
  c_serve->callback([&] {
    const auto cfg = dp::load_service_config(session_file);
    progress("serving " + std::to_string(cfg.sessions.size()) + " session(s) on http://" + host + ":" + std::to_string(port));
    dp::serve_ratings(host, port, cfg);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "dhqa: " << e.what() << '\n';
    return 1;
  }
  return status;
}
