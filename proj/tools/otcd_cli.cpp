// Copyright 2026 The OTCD Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: generate, fit, track, evaluate, bench.
// Exit codes: 0 success, 1 runtime error, 2 configuration error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "otcd/otcd.hpp"

namespace otcd {
namespace {

constexpr int kRuntimeError = 1;
constexpr int kConfigError = 2;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- generate ----

struct GenerateArgs {
  std::string script;
  std::string out;
  std::uint64_t seed = 0;
  StreamHeader header;
  int K = 0;  // optional key period to validate against the GOP
};

int run_generate(const GenerateArgs& a) {
  a.header.validate();
  if (a.K != 0) {
    TrackerConfig cfg;
    cfg.K = a.K;
    cfg.validate(a.header.gop);
  }
  const MotionScript script = parse_motion_script(slurp(a.script));
  const Scenario sc = generate_scenario(script, a.header, a.seed);
  write_scenario(sc, a.out);
  int iframes = 0;
  for (const auto& f : sc.frames) iframes += f.kind == FrameKind::I;
  std::printf("frames %d objects %zu gop %d iframes %d grid %dx%d\n", sc.frame_count(),
              script.objects.size(), a.header.gop, iframes, a.header.grid_w(), a.header.grid_h());
  return 0;
}

// ---- fit ----

struct FitArgs {
  std::vector<std::string> scenarios;
  std::string target = "regressor";
  std::string out;
  std::string base;  // existing models file to update
  double lr = -1.0;
  int epochs = -1;
  std::uint64_t seed = 0;
  // regressor
  double ridge = 1e-3;
  int augment = 3;
  double jitter = 0.05;
  // affinity
  int pairs = 2000;
  double feature_noise = 0.1;
  std::string mode = "withps";
};

// Same/different identity pairs drawn from the identities of the scenarios;
// alternate labels, starting with a same pair.
std::vector<AffinityPair> identity_pairs(const std::vector<Scenario>& set, int n, double noise,
                                         std::uint64_t seed) {
  std::vector<std::pair<std::uint64_t, const StreamHeader*>> pool;
  for (const auto& sc : set)
    for (const auto& [id, s] : sc.identity_seeds) pool.emplace_back(s, &sc.header);
  if (pool.empty()) throw std::runtime_error("fit: the scenarios hold no identities");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<AffinityPair> out;
  for (int i = 0; i < n; ++i) {
    const auto& [a, header] = pool[pick(rng)];
    std::uint64_t b = a;
    if (i % 2 == 1) {
      do {
        b = pool.size() > 1 ? pool[pick(rng)].first : rng();
      } while (b == a);
    }
    out.push_back({feature_of(a, header->feature_bins, header->feature_channels, noise, rng),
                   feature_of(b, header->feature_bins, header->feature_channels, noise, rng),
                   i % 2 == 0 ? 1 : 0});
  }
  return out;
}

int run_fit(const FitArgs& a) {
  if (a.scenarios.empty()) throw ConfigError("fit: no --scenarios given");
  std::vector<Scenario> set;
  for (const auto& path : a.scenarios) set.push_back(read_scenario(path));
  Models models;
  if (!a.base.empty()) models = read_models(a.base);

  if (a.target == "regressor") {
    std::vector<RegressorSample> samples;
    for (const auto& sc : set) {
      auto part = collect_regressor_samples(sc);
      samples.insert(samples.end(), part.begin(), part.end());
    }
    if (samples.empty()) throw std::runtime_error("fit: empty training set");
    const int m = set.front().header.feature_bins;
    RegressorHyper h;
    h.seed = a.seed;
    h.ridge = a.ridge;
    if (a.lr > 0.0) h.lr = a.lr;
    if (a.epochs >= 0) h.epochs = a.epochs;
    const auto batch = augment_regressor_samples(samples, a.augment, a.jitter, a.seed + 1);
    const RegressorFit fit = fit_regressor(batch, h, m);
    models.regressor = fit.params;
    std::printf("target regressor samples %zu augmented %zu epochs %d loss %.9g\n", samples.size(),
                batch.size(), fit.epochs_run, fit.loss);
  } else {
    AffinityHyper h;
    h.seed = a.seed;
    h.mode = a.mode == "nops" ? AffinityMode::NoPS : AffinityMode::WithPS;
    if (a.lr > 0.0) h.lr = a.lr;
    if (a.epochs >= 0) h.epochs = a.epochs;
    if (a.pairs < 10) throw ConfigError("fit: --pairs must be >= 10");
    auto pairs = identity_pairs(set, a.pairs, a.feature_noise, a.seed);
    // Last fifth is held out.
    const auto split = pairs.begin() + static_cast<std::ptrdiff_t>(pairs.size() * 4 / 5);
    const std::vector<AffinityPair> train(pairs.begin(), split), test(split, pairs.end());
    const AffinityFit fit = fit_affinity_head(train, h);
    std::vector<double> stats;
    std::vector<int> labels;
    for (const auto& p : test) {
      stats.push_back(affinity_statistic(h.mode, p.a, p.b));
      labels.push_back(p.label);
    }
    const auto [held_loss, held_acc] = evaluate_head(fit.params, stats, labels);
    models.affinity = fit.params;
    std::printf("target affinity pairs %zu loss %.9g accuracy %.4f heldout_loss %.9g heldout_accuracy %.4f\n",
                train.size(), fit.loss, fit.accuracy, held_loss, held_acc);
  }
  write_models(models, a.out);
  return 0;
}

// ---- track ----

struct DetectorArgs {
  std::string detections;  // external MOTChallenge det file
  DetectorConfig oracle;
  double delay = 0.0;
};

struct TrackArgs {
  std::string scenario;
  std::string models;
  std::string propagator = "regressor";
  std::string assoc = "twostep";
  bool no_appearance = false;
  std::string out;
  std::string timing_out;
  std::string baseline;  // timing report of a reference run
  TrackerConfig cfg;
  DetectorArgs det;
};

PropagatorKind propagator_of(const std::string& s) {
  if (s == "bboxavg") return PropagatorKind::BBoxAvg;
  if (s == "pixelshift") return PropagatorKind::PixelShift;
  return PropagatorKind::Regressor;
}

Models load_models(const std::string& path, const TrackerConfig& cfg) {
  if (path.empty()) {
    if (cfg.propagator == PropagatorKind::Regressor)
      throw ConfigError("the regressor propagator needs --models");
    return {};
  }
  return read_models(path);
}

std::unique_ptr<Detector> make_detector(const DetectorArgs& a) {
  if (!a.detections.empty())
    return std::make_unique<FileDetector>(read_motchallenge(a.detections), a.oracle.feature_noise,
                                          a.oracle.rng_seed);
  return std::make_unique<OracleDetector>(a.oracle);
}

double read_wall(const std::string& timing_path) {
  std::istringstream in(slurp(timing_path));
  for (std::string line; std::getline(in, line);)
    if (line.rfind("wall,", 0) == 0) return std::stod(line.substr(5));
  throw std::runtime_error(timing_path + ": no wall entry");
}

int run_track(TrackArgs a) {
  a.cfg.propagator = propagator_of(a.propagator);
  a.cfg.association = a.assoc == "onestep" ? AssociationMode::OneStep : AssociationMode::TwoStep;
  a.cfg.appearance = !a.no_appearance;
  const Scenario sc = read_scenario(a.scenario);
  a.cfg.validate(sc.header.gop);
  const Models models = load_models(a.models, a.cfg);
  auto inner = make_detector(a.det);
  DelayedDetector det(*inner, a.det.delay);
  const TrackResult res = track(sc, det, a.cfg, models);
  if (!a.out.empty()) write_motchallenge(res.rows, a.out);

  std::optional<double> measured;
  if (!a.baseline.empty() && res.timings.wall > 0.0) measured = read_wall(a.baseline) / res.timings.wall;
  if (!a.timing_out.empty()) {
    std::ofstream out(a.timing_out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + a.timing_out + " for writing");
    write_timing_report(res.timings, a.cfg.K, out, measured);
  }
  std::set<int> ids;
  for (const auto& r : res.rows) ids.insert(r.id);
  std::printf("frames %d rows %zu ids %zu hz %.1f modeled_speedup %.3f", sc.frame_count(),
              res.rows.size(), ids.size(), res.timings.hz(),
              res.timings.key_frames ? speedup_model(res.timings, a.cfg.K) : 0.0);
  if (measured) std::printf(" measured_speedup %.3f", *measured);
  std::printf("\n");
  return 0;
}

// ---- evaluate ----

std::vector<TrackRow> load_rows(const std::string& path) {
  const std::string text = slurp(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return gt_rows(read_scenario(path));
  std::istringstream in(text);
  return read_motchallenge(in);
}

int run_evaluate(const std::string& gt_path, const std::string& res_path, double iou_min) {
  if (!(iou_min > 0.0 && iou_min <= 1.0)) throw ConfigError("--iou-min must lie in (0,1]");
  const auto gt = load_rows(gt_path);
  const auto res = load_rows(res_path);
  std::printf("%s\n%s\n", metric_table_header(),
              metric_table_row(clear_mot(gt, res, iou_min), idf1(gt, res, iou_min)).c_str());
  return 0;
}

// ---- bench ----

struct BenchArgs {
  std::string scenario;
  std::string models;
  std::vector<int> Ks = {1, 2, 3, 4, 6};
  int repeat = 3;
  std::string propagator = "regressor";
  double calibrate = 0.0;  // target propagation ratio for pacing; 0 disables
  TrackerConfig cfg;
  DetectorArgs det;
};

int run_bench(BenchArgs a) {
  if (a.repeat < 1) throw ConfigError("--repeat must be >= 1");
  a.cfg.propagator = propagator_of(a.propagator);
  const Scenario sc = read_scenario(a.scenario);
  for (int K : a.Ks) {
    TrackerConfig c = a.cfg;
    c.K = K;
    c.validate(sc.header.gop);
  }
  const Models models = load_models(a.models, a.cfg);
  auto inner = make_detector(a.det);
  if (a.calibrate > 0.0) a.cfg.pace_ratio = a.calibrate;

  const auto gt = gt_rows(sc);
  std::vector<int> Ks = a.Ks;
  if (std::find(Ks.begin(), Ks.end(), 1) == Ks.end()) Ks.insert(Ks.begin(), 1);
  std::map<int, FrameTimings> best;
  std::map<int, double> mota;
  for (int K : Ks) {
    TrackerConfig c = a.cfg;
    c.K = K;
    for (int r = 0; r < a.repeat; ++r) {
      DelayedDetector det(*inner, a.det.delay);
      const auto res = track(sc, det, c, models);
      if (!best.count(K) || res.timings.wall < best[K].wall) best[K] = res.timings;
      if (r == 0) mota[K] = clear_mot(gt, res.rows).mota;
    }
  }
  std::printf("K,MOTA,Hz,modeled_s,measured_s\n");
  for (int K : a.Ks) {
    const FrameTimings& t = best[K];
    std::printf("%d,%.3f,%.1f,%.3f,%.3f\n", K, mota[K], t.hz(), speedup_model(t, K),
                best[1].wall / t.wall);
  }
  return 0;
}

void add_tracker_flags(CLI::App* sub, TrackerConfig& cfg, DetectorArgs& det) {
  sub->add_option("--K", cfg.K, "key-frame period (must divide the GOP)");
  sub->add_option("--alpha", cfg.alpha, "IoU weight of the one-step blended cost");
  sub->add_option("--tau-iou", cfg.tau_iou);
  sub->add_option("--tau-app", cfg.tau_app);
  sub->add_option("--conf-min", cfg.conf_min, "detections below this confidence are dropped");
  sub->add_option("--c-confirm", cfg.c_confirm, "births above this confidence start confirmed");
  sub->add_option("--l-confirm", cfg.l_confirm);
  sub->add_option("--l-demote", cfg.l_demote);
  sub->add_option("--l-delete", cfg.l_delete);
  sub->add_option("--l-f", cfg.l_f, "gallery capacity");
  sub->add_option("--m", cfg.m, "pooling bins per side");
  sub->add_option("--detections", det.detections, "external MOTChallenge detection file");
  sub->add_option("--det-noise-center", det.oracle.noise_center);
  sub->add_option("--det-noise-size", det.oracle.noise_size);
  sub->add_option("--miss-rate", det.oracle.miss_rate);
  sub->add_option("--fp-rate", det.oracle.fp_rate);
  sub->add_option("--feature-noise", det.oracle.feature_noise);
  sub->add_option("--conf-low", det.oracle.conf_low);
  sub->add_option("--det-seed", det.oracle.rng_seed);
  sub->add_option("--delay", det.delay, "synthetic detector latency in seconds");
  sub->add_option("--pro-delay", cfg.propagation_delay,
                  "synthetic propagation latency per non-key frame in seconds");
  sub->add_option("--pace", cfg.pace_ratio,
                  "pad propagation until this propagation/detection time ratio is reached");
}

const std::vector<std::string> kPropagators = {"bboxavg", "pixelshift", "regressor"};

}  // namespace
}  // namespace otcd

int main(int argc, char** argv) {
  using namespace otcd;
  CLI::App app{"Compressed-domain online multi-object tracker"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a scenario from a motion script");
  g->add_option("--script", gen.script)->required()->check(CLI::ExistingFile);
  g->add_option("--out", gen.out)->required();
  g->add_option("--seed", gen.seed);
  g->add_option("--width", gen.header.width);
  g->add_option("--height", gen.header.height);
  g->add_option("--block", gen.header.block);
  g->add_option("--gop", gen.header.gop);
  g->add_option("--fps", gen.header.fps);
  g->add_option("--channels", gen.header.feature_channels);
  g->add_option("--bins", gen.header.feature_bins);
  g->add_option("--K", gen.K, "key-frame period to check against the GOP");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit the velocity regressor or the affinity head");
  f->add_option("--scenarios", fit.scenarios)->required()->check(CLI::ExistingFile);
  f->add_option("--target", fit.target)->check(CLI::IsMember({"regressor", "affinity"}));
  f->add_option("--out", fit.out)->required();
  f->add_option("--models", fit.base, "existing models file to update")->check(CLI::ExistingFile);
  f->add_option("--lr", fit.lr);
  f->add_option("--epochs", fit.epochs);
  f->add_option("--seed", fit.seed);
  f->add_option("--ridge", fit.ridge);
  f->add_option("--augment", fit.augment, "jittered copies per regressor sample");
  f->add_option("--jitter", fit.jitter);
  f->add_option("--pairs", fit.pairs);
  f->add_option("--feature-noise", fit.feature_noise);
  f->add_option("--mode", fit.mode)->check(CLI::IsMember({"withps", "nops"}));

  TrackArgs tr;
  auto* t = app.add_subcommand("track", "run the tracker on a scenario");
  t->add_option("--scenario", tr.scenario)->required()->check(CLI::ExistingFile);
  t->add_option("--models", tr.models)->check(CLI::ExistingFile);
  t->add_option("--propagator", tr.propagator)->check(CLI::IsMember(kPropagators));
  t->add_option("--assoc", tr.assoc)->check(CLI::IsMember({"twostep", "onestep"}));
  t->add_flag("--no-appearance", tr.no_appearance, "skip the appearance step of two-step");
  t->add_option("--out", tr.out);
  t->add_option("--timing-out", tr.timing_out);
  t->add_option("--baseline", tr.baseline, "timing report of a reference run")
      ->check(CLI::ExistingFile);
  add_tracker_flags(t, tr.cfg, tr.det);

  std::string gt_path, res_path;
  double iou_min = 0.5;
  auto* e = app.add_subcommand("evaluate", "print the metric table");
  e->add_option("--gt", gt_path)->required()->check(CLI::ExistingFile);
  e->add_option("--results", res_path)->required()->check(CLI::ExistingFile);
  e->add_option("--iou-min", iou_min);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "sweep the key-frame period");
  b->add_option("--scenario", bench.scenario)->required()->check(CLI::ExistingFile);
  b->add_option("--models", bench.models)->check(CLI::ExistingFile);
  b->add_option("--K-list", bench.Ks)->delimiter(',');
  b->add_option("--repeat", bench.repeat);
  b->add_option("--propagator", bench.propagator)->check(CLI::IsMember(kPropagators));
  b->add_option("--calibrate", bench.calibrate,
                "target propagation ratio, reached by padding propagation time");
  add_tracker_flags(b, bench.cfg, bench.det);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (g->parsed()) return run_generate(gen);
    if (f->parsed()) return run_fit(fit);
    if (t->parsed()) return run_track(tr);
    if (e->parsed()) return run_evaluate(gt_path, res_path, iou_min);
    if (b->parsed()) return run_bench(bench);
  } catch (const ConfigError& err) {
    std::cerr << "configuration error: " << err.what() << '\n';
    return kConfigError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kRuntimeError;
  }
  return kConfigError;
}
