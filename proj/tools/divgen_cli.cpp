// SPDX-License-Identifier: Apache-2.0
//
// divgen: generate star datasets, train the diversity-regularized generative
// model and its GAN/VAE baselines, sample actions, evaluate FD/JSD, and emit
// SVG scatter plots and comparison tables.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "divgen/data.hpp"
#include "divgen/metrics.hpp"
#include "divgen/nets.hpp"
#include "divgen/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace divgen;

namespace {

constexpr const char* kToolVersion = "divgen 0.1.0";

// exit codes: 0 success, 1 usage, 2 I/O, 3 numeric failure
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

std::string default_out_dir() {
  const char* env = std::getenv("DIVGEN_OUT");
  return env && *env ? env : ".";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// Manifest of one command run. Every referenced path must exist at write time.
void write_manifest(const std::string& dir, const std::string& command,
                    const json& config_snapshot,
                    const std::vector<std::string>& paths) {
  json j;
  j["tool"] = kToolVersion;
  j["command"] = command;
  j["written_at"] = timestamp_utc();
  j["config"] = config_snapshot;
  json listed = json::array();
  for (const auto& p : paths) {
    if (!fs::exists(p)) {
      throw IoError("manifest references missing path " + p);
    }
    listed.push_back(p);
  }
  j["paths"] = listed;
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw IoError("cannot write " + dir + "/manifest.json");
  out << j.dump(2) << "\n";
}

// --data accepts a dataset csv or a directory holding train.csv/test.csv.
struct DataPaths {
  std::string train;
  std::string test;  // empty if absent
};

DataPaths resolve_data(const std::string& arg) {
  DataPaths p;
  if (fs::is_directory(arg)) {
    p.train = arg + "/train.csv";
    if (fs::exists(arg + "/test.csv")) p.test = arg + "/test.csv";
  } else {
    p.train = arg;
    const fs::path sibling = fs::path(arg).parent_path() / "test.csv";
    if (fs::exists(sibling) && sibling.string() != arg) p.test = sibling.string();
  }
  if (!fs::exists(p.train)) throw IoError("dataset not found: " + p.train);
  return p;
}

void save_points_csv(const Tensor& pts, const std::string& path,
                     const std::string& header) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << header << "\n";
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    out << format_double(pts.at(i, 0)) << ',' << format_double(pts.at(i, 1))
        << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

Tensor load_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  ++line_no;
  std::vector<double> v;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',')) {
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": expected two fields");
    }
    v.push_back(parse_double(a, line_no));
    v.push_back(parse_double(b, line_no));
  }
  if (v.empty()) throw ParseError(path + ": no data rows");
  const std::size_t n = v.size() / 2;
  return Tensor({n, 2}, std::move(v));
}

StarSpec star_from_sidecar(const std::string& path) {
  // Accept a sidecar json or a dataset csv (sidecar resolved automatically).
  std::string side = path;
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
    side = dataset_sidecar_path(path);
  }
  std::ifstream in(side);
  if (!in) throw IoError("cannot open star spec " + side);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(side + ": " + e.what());
  }
  const json& st = j.contains("star") ? j["star"] : j;
  StarSpec spec;
  spec.arms = st.value("arms", std::size_t{5});
  spec.r_inner = st.value("r_inner", 0.35);
  spec.r_outer = st.value("r_outer", 1.0);
  if (st.contains("center")) spec.center = st["center"].get<Point2>();
  spec.rotation = st.value("rotation", 0.0);
  spec.validate();
  return spec;
}

// ---- SVG scatter output ----

class SvgScatter {
 public:
  SvgScatter(double width, double height) : w_(width), h_(height) {
    body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_
          << "\" height=\"" << h_ << "\" viewBox=\"0 0 " << w_ << " " << h_
          << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  struct Panel {
    double x0, y0, size;       // pixel box
    double lo, hi;             // data range (square)
  };

  double px(const Panel& p, double x) const {
    return p.x0 + (x - p.lo) / (p.hi - p.lo) * p.size;
  }
  double py(const Panel& p, double y) const {
    return p.y0 + p.size - (y - p.lo) / (p.hi - p.lo) * p.size;
  }

  void frame(const Panel& p, const std::string& title) {
    body_ << "<rect x=\"" << p.x0 << "\" y=\"" << p.y0 << "\" width=\""
          << p.size << "\" height=\"" << p.size
          << "\" fill=\"none\" stroke=\"#444\"/>\n";
    body_ << "<text x=\"" << p.x0 + p.size / 2 << "\" y=\"" << p.y0 - 8
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"14\">"
          << title << "</text>\n";
  }

  void polyline(const Panel& p, const std::vector<Point2>& pts,
                const std::string& color) {
    body_ << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& pt : pts) {
      body_ << px(p, pt[0]) << ',' << py(p, pt[1]) << ' ';
    }
    body_ << "\"/>\n";
  }

  void dots(const Panel& p, const Tensor& pts, const std::string& color,
            double r, double opacity) {
    body_ << "<g fill=\"" << color << "\" fill-opacity=\"" << opacity << "\">\n";
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      const double x = pts.at(i, 0), y = pts.at(i, 1);
      if (x < p.lo || x > p.hi || y < p.lo || y > p.hi) continue;
      body_ << "<circle cx=\"" << px(p, x) << "\" cy=\"" << py(p, y)
            << "\" r=\"" << r << "\"/>\n";
    }
    body_ << "</g>\n";
  }

  void caption(double x, double y, const std::string& text,
               const std::string& color) {
    body_ << "<circle cx=\"" << x << "\" cy=\"" << y - 4 << "\" r=\"4\" fill=\""
          << color << "\"/>\n<text x=\"" << x + 10 << "\" y=\"" << y
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << text
          << "</text>\n";
  }

  void save(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << body_.str() << "</svg>\n";
    if (!out) throw IoError("write failed for " + path);
  }

 private:
  double w_, h_;
  std::ostringstream body_;
};

std::vector<Point2> boundary_polyline(const StarSpec& spec, std::size_t pts) {
  std::vector<Point2> out;
  out.reserve(pts + 1);
  for (std::size_t i = 0; i <= pts; ++i) {
    const double th = 2.0 * 3.14159265358979323846 * static_cast<double>(i) /
                      static_cast<double>(pts);
    const double r = star_boundary_radius(spec, th);
    out.push_back({spec.center[0] + r * std::cos(th),
                   spec.center[1] + r * std::sin(th)});
  }
  return out;
}

// ---- Commands ----

struct GenDataArgs {
  std::size_t arms = 5;
  double r_inner = 0.35;
  double r_outer = 1.0;
  std::size_t n_train = 600;
  std::size_t n_test = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& a) {
  StarSpec spec;
  spec.arms = a.arms;
  spec.r_inner = a.r_inner;
  spec.r_outer = a.r_outer;
  spec.validate();
  ensure_dir(a.out);
  auto [train, test] = generate_dataset(spec, a.n_train, a.n_test, a.seed);
  const std::string train_path = a.out + "/train.csv";
  const std::string test_path = a.out + "/test.csv";
  save_dataset(train, train_path);
  save_dataset(test, test_path);
  json cfg{{"arms", a.arms},       {"r_inner", a.r_inner},
           {"r_outer", a.r_outer}, {"n_train", a.n_train},
           {"n_test", a.n_test},   {"seed", a.seed}};
  write_manifest(a.out, "gen-data", cfg,
                 {train_path, dataset_sidecar_path(train_path), test_path,
                  dataset_sidecar_path(test_path)});
  std::cout << "wrote " << train_path << " (" << train.size() << " rows), "
            << test_path << " (" << test.size() << " rows)\n";
  return kExitOk;
}

struct TrainArgs {
  std::string model;
  std::string data;
  std::string config_file;
  std::string out;
  std::size_t seeds = 1;
  bool seed_set = false;
  std::uint64_t seed = 0;
  bool steps_set = false;
  std::int64_t steps = 0;
};

void run_one_training(const std::string& model, const Dataset& train,
                      const Dataset* test, const TrainConfig& cfg,
                      const std::string& dir) {
  ensure_dir(dir);
  const std::string ckpt = dir + "/checkpoint.json";
  TrainReport report;
  if (model == "ours") {
    auto [m, rep] = train_ours(train, cfg);
    save_checkpoint(m, "ours", ckpt);
    report = std::move(rep);
  } else if (model == "gan") {
    auto [m, rep] = train_gan_baseline(train, cfg);
    save_checkpoint(m, "gan", ckpt);
    report = std::move(rep);
  } else if (model == "vae") {
    auto [m, rep] = train_vae_baseline(train, cfg);
    save_checkpoint(m, ckpt);
    report = std::move(rep);
  } else if (model == "fwd") {
    auto [m, rep] = train_forward_model(train, cfg, test);
    save_checkpoint(m, "forward", ckpt);
    report = std::move(rep);
  } else {
    throw ContractError("unknown model '" + model + "'");
  }
  report.checkpoint_path = ckpt;
  const std::string trace = dir + "/losses.csv";
  report.save_trace_csv(trace);
  std::ofstream rep_out(dir + "/train_report.json");
  if (!rep_out) throw IoError("cannot write " + dir + "/train_report.json");
  rep_out << report.to_json_string() << "\n";
  json cfg_json = json::parse(cfg.to_json_string());
  cfg_json["model"] = model;
  write_manifest(dir, "train", cfg_json,
                 {ckpt, trace, dir + "/train_report.json"});
}

int cmd_train(const TrainArgs& a) {
  DataPaths paths = resolve_data(a.data);
  Dataset train = load_dataset(paths.train);
  Dataset test;
  const bool has_test = !paths.test.empty();
  if (has_test) test = load_dataset(paths.test);

  TrainConfig cfg;
  if (!a.config_file.empty()) {
    std::ifstream in(a.config_file);
    if (!in) throw IoError("cannot open config " + a.config_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    cfg = TrainConfig::from_json_string(ss.str());
  }
  if (a.seed_set) cfg.seed = a.seed;
  if (a.steps_set) cfg.steps = a.steps;
  cfg.validate();

  ensure_dir(a.out);
  if (a.seeds <= 1) {
    run_one_training(a.model, train, has_test ? &test : nullptr, cfg, a.out);
    std::cout << "trained " << a.model << " -> " << a.out << "/checkpoint.json\n";
    return kExitOk;
  }

  // Fan out independent seed runs, one thread each.
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(a.seeds);
  for (std::size_t i = 0; i < a.seeds; ++i) {
    workers.emplace_back([&, i] {
      try {
        TrainConfig c = cfg;
        c.seed = cfg.seed + i;
        run_one_training(a.model, train, has_test ? &test : nullptr, c,
                         a.out + "/seed" + std::to_string(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::cout << "trained " << a.model << " across " << a.seeds << " seeds -> "
            << a.out << "/seed*/checkpoint.json\n";
  return kExitOk;
}

struct SampleArgs {
  std::string checkpoint;
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  std::string out;
  std::string fwd_checkpoint;
  std::string states_out;
};

int cmd_sample(const SampleArgs& a) {
  const std::string kind = checkpoint_kind(a.checkpoint);
  Tensor actions;
  if (kind == "vae") {
    VaeModel m = load_vae_checkpoint(a.checkpoint);
    actions = sample_actions(m, a.n, a.seed);
  } else {
    ModelBundle m = load_bundle_checkpoint(a.checkpoint);
    Tensor s_t = Tensor::row({0.0, 0.0});
    actions = sample_actions(m, s_t, a.n, a.seed);
  }
  save_points_csv(actions, a.out, "a_x,a_y");
  std::cout << "wrote " << a.out << " (" << actions.rows() << " actions)\n";

  if (!a.states_out.empty()) {
    if (a.fwd_checkpoint.empty()) {
      throw ContractError("--states-out needs --fwd-checkpoint");
    }
    ModelBundle fwd = load_bundle_checkpoint(a.fwd_checkpoint);
    Tensor s_t = Tensor::row({0.0, 0.0});
    Tensor states = fwd.predict_next_state(s_t, actions);
    save_points_csv(states, a.states_out, "s_x,s_y");
    std::cout << "wrote " << a.states_out << " (" << states.rows()
              << " predicted states)\n";
  }
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::size_t seeds = 5;
  std::size_t n = 10000;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  DataPaths paths = resolve_data(a.data);
  Dataset ref = load_dataset(!paths.test.empty() ? paths.test : paths.train);
  const std::string kind = checkpoint_kind(a.checkpoint);

  MetricsReport rep;
  if (kind == "vae") {
    VaeModel m = load_vae_checkpoint(a.checkpoint);
    rep = evaluate(m, ref, ref.spec, a.n, a.seeds);
    rep.label = "vae";
  } else {
    std::string trained_as;
    ModelBundle m = load_bundle_checkpoint(a.checkpoint, &trained_as);
    rep = evaluate(m, ref, ref.spec, a.n, a.seeds);
    rep.label = trained_as.empty() ? "bundle" : trained_as;
  }

  ensure_dir(a.out);
  const std::string json_path = a.out + "/metrics.json";
  const std::string csv_path = a.out + "/metrics.csv";
  std::ofstream jout(json_path);
  if (!jout) throw IoError("cannot write " + json_path);
  jout << rep.to_json_string() << "\n";
  jout.close();
  std::ofstream cout_(csv_path);
  if (!cout_) throw IoError("cannot write " + csv_path);
  cout_ << MetricsReport::csv_header() << "\n" << rep.csv_row() << "\n";
  cout_.close();
  json cfg{{"checkpoint", a.checkpoint},
           {"data", a.data},
           {"seeds", a.seeds},
           {"n", a.n}};
  write_manifest(a.out, "eval", cfg, {json_path, csv_path});
  std::cout << rep.label << ": FD " << rep.fd_mean << " +- " << rep.fd_std
            << ", JSD " << rep.jsd_mean << " +- " << rep.jsd_std
            << ", inside " << rep.inside_mean << "\n";
  return kExitOk;
}

struct PlotArgs {
  std::string actions;
  std::string states;
  std::string spec;
  std::string out;
};

int cmd_plot(const PlotArgs& a) {
  Tensor actions = load_points_csv(a.actions);
  StarSpec spec = star_from_sidecar(a.spec);
  const bool two_panels = !a.states.empty();

  const double panel = 420.0, margin = 50.0;
  const double width = two_panels ? panel * 2 + margin * 3 : panel + margin * 2;
  SvgScatter svg(width, panel + margin * 2);

  // Ground truth drawn fresh from the spec, fixed plotting seed.
  Rng truth_rng(20250809);
  std::vector<double> tv;
  const std::size_t truth_n = 1500;
  for (std::size_t i = 0; i < truth_n; ++i) {
    const Point2 p = sample_star_action(spec, truth_rng);
    tv.insert(tv.end(), {p[0], p[1]});
  }
  Tensor truth({truth_n, 2}, std::move(tv));

  const double r_lim = spec.r_outer * 1.25;
  SvgScatter::Panel pa{margin, margin, panel, spec.center[0] - r_lim,
                       spec.center[0] + r_lim};
  svg.frame(pa, "action space");
  svg.dots(pa, truth, "#bbbbbb", 1.6, 0.6);
  svg.dots(pa, actions, "#1f77b4", 1.6, 0.5);
  svg.polyline(pa, boundary_polyline(spec, 512), "#d62728");
  svg.caption(margin + 6, margin + panel + 24, "ground truth", "#bbbbbb");
  svg.caption(margin + 126, margin + panel + 24, "generated", "#1f77b4");

  if (two_panels) {
    Tensor states = load_points_csv(a.states);
    // warped boundary as the reference curve in state space
    auto curve = boundary_polyline(spec, 512);
    double lim = 1e-9;
    for (auto& p : curve) {
      p = warp_to_state(p);
      lim = std::max({lim, std::abs(p[0]), std::abs(p[1])});
    }
    for (std::size_t i = 0; i < states.rows(); ++i) {
      lim = std::max({lim, std::abs(states.at(i, 0)), std::abs(states.at(i, 1))});
    }
    lim *= 1.1;
    SvgScatter::Panel pb{margin * 2 + panel, margin, panel, -lim, lim};
    svg.frame(pb, "state space");
    svg.dots(pb, states, "#2ca02c", 1.6, 0.5);
    svg.polyline(pb, curve, "#d62728");
    svg.caption(margin * 2 + panel + 6, margin + panel + 24, "predicted states",
                "#2ca02c");
  }

  svg.save(a.out);
  std::cout << "wrote " << a.out << "\n";
  return kExitOk;
}

struct ReportArgs {
  std::vector<std::string> eval_dirs;
  std::string out;
};

int cmd_report(const ReportArgs& a) {
  std::vector<MetricsReport> reports;
  for (const auto& dir : a.eval_dirs) {
    const std::string path =
        fs::is_directory(dir) ? dir + "/metrics.json" : dir;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    reports.push_back(MetricsReport::from_json_string(ss.str()));
  }
  ensure_dir(a.out);

  const std::string csv_path = a.out + "/comparison.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path);
  csv << MetricsReport::csv_header() << "\n";
  for (const auto& r : reports) csv << r.csv_row() << "\n";
  csv.close();

  const std::string txt_path = a.out + "/comparison.txt";
  std::ofstream txt(txt_path);
  if (!txt) throw IoError("cannot write " + txt_path);
  txt << "model        FD (mean +- std)        JSD (mean +- std)     inside\n";
  for (const auto& r : reports) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %8.4f +- %-8.4f   %8.4f +- %-8.4f   %6.3f\n",
                  r.label.c_str(), r.fd_mean, r.fd_std, r.jsd_mean, r.jsd_std,
                  r.inside_mean);
    txt << line;
  }
  txt.close();
  write_manifest(a.out, "report", json{{"inputs", a.eval_dirs}},
                 {csv_path, txt_path});
  std::cout << "wrote " << csv_path << " and " << txt_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"normalized-diversification generative models on star data"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* sc_gen = app.add_subcommand("gen-data", "generate a star dataset");
  sc_gen->add_option("--arms", gen.arms, "number of star lobes")->check(CLI::Range(3, 64));
  sc_gen->add_option("--r-inner", gen.r_inner, "inner radius");
  sc_gen->add_option("--r-outer", gen.r_outer, "outer radius");
  sc_gen->add_option("--n-train", gen.n_train, "training transitions");
  sc_gen->add_option("--n-test", gen.n_test, "test transitions");
  sc_gen->add_option("--seed", gen.seed, "dataset seed");
  sc_gen->add_option("--out", gen.out, "output directory");

  TrainArgs tr;
  auto* sc_tr = app.add_subcommand("train", "train a model");
  sc_tr->add_option("--model", tr.model, "ours | gan | vae | fwd")
      ->required()
      ->check(CLI::IsMember({"ours", "gan", "vae", "fwd"}));
  sc_tr->add_option("--data", tr.data, "dataset csv or directory")->required();
  sc_tr->add_option("--config", tr.config_file, "train config json");
  sc_tr->add_option("--out", tr.out, "output directory");
  sc_tr->add_option("--seeds", tr.seeds, "parallel seed fan-out")->check(CLI::Range(1, 64));
  auto* seed_opt = sc_tr->add_option("--seed", tr.seed, "base seed");
  auto* steps_opt = sc_tr->add_option("--steps", tr.steps, "training steps");

  SampleArgs sm;
  auto* sc_sm = app.add_subcommand("sample", "sample actions from a checkpoint");
  sc_sm->add_option("--checkpoint", sm.checkpoint, "model checkpoint")->required();
  sc_sm->add_option("--n", sm.n, "number of samples");
  sc_sm->add_option("--seed", sm.seed, "sampling seed");
  sc_sm->add_option("--out", sm.out, "actions csv path");
  sc_sm->add_option("--fwd-checkpoint", sm.fwd_checkpoint,
                    "forward model checkpoint for state prediction");
  sc_sm->add_option("--states-out", sm.states_out, "predicted states csv path");

  EvalArgs ev;
  auto* sc_ev = app.add_subcommand("eval", "evaluate a checkpoint");
  sc_ev->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  sc_ev->add_option("--data", ev.data, "dataset csv or directory")->required();
  sc_ev->add_option("--seeds", ev.seeds, "sampling repetitions")->check(CLI::Range(1, 64));
  sc_ev->add_option("--n", ev.n, "samples per repetition");
  sc_ev->add_option("--out", ev.out, "output directory");

  PlotArgs pl;
  auto* sc_pl = app.add_subcommand("plot", "svg scatter of actions/states");
  sc_pl->add_option("--actions", pl.actions, "generated actions csv")->required();
  sc_pl->add_option("--states", pl.states, "predicted states csv");
  sc_pl->add_option("--spec", pl.spec, "dataset sidecar json (or dataset csv)")
      ->required();
  sc_pl->add_option("--out", pl.out, "output svg path");

  ReportArgs rp;
  auto* sc_rp = app.add_subcommand("report", "merge eval outputs into a table");
  sc_rp->add_option("--eval-dirs", rp.eval_dirs,
                    "eval output directories (or metrics.json paths)")
      ->required()
      ->expected(-1);
  sc_rp->add_option("--out", rp.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sc_gen) {
      if (gen.out.empty()) gen.out = default_out_dir();
      return cmd_gen_data(gen);
    }
    if (*sc_tr) {
      tr.seed_set = seed_opt->count() > 0;
      tr.steps_set = steps_opt->count() > 0;
      if (tr.out.empty()) tr.out = default_out_dir();
      return cmd_train(tr);
    }
    if (*sc_sm) {
      if (sm.out.empty()) sm.out = default_out_dir() + "/actions.csv";
      return cmd_sample(sm);
    }
    if (*sc_ev) {
      if (ev.out.empty()) ev.out = default_out_dir();
      return cmd_eval(ev);
    }
    if (*sc_pl) {
      if (pl.out.empty()) pl.out = default_out_dir() + "/plot.svg";
      return cmd_plot(pl);
    }
    if (*sc_rp) {
      if (rp.out.empty()) rp.out = default_out_dir();
      return cmd_report(rp);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
