// SPDX-License-Identifier: Apache-2.0
#include "divgen/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace divgen {

using nlohmann::json;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr int kRejectionCap = 10000;
constexpr int kDatasetFormatVersion = 1;
}  // namespace

void StarSpec::validate() const {
  if (arms < 3) throw ContractError("StarSpec: arms must be >= 3");
  if (r_inner <= 0.0) throw ContractError("StarSpec: r_inner must be > 0");
  if (r_outer <= r_inner) throw ContractError("StarSpec: r_outer must exceed r_inner");
}

double star_boundary_radius(const StarSpec& spec, double theta) {
  const double c = std::cos(static_cast<double>(spec.arms) * (theta - spec.rotation));
  return spec.r_inner + (spec.r_outer - spec.r_inner) * (0.5 + 0.5 * c);
}

bool inside_star(const StarSpec& spec, const Point2& p) {
  const double dx = p[0] - spec.center[0];
  const double dy = p[1] - spec.center[1];
  const double r = std::hypot(dx, dy);
  if (r == 0.0) return true;
  return r <= star_boundary_radius(spec, std::atan2(dy, dx));
}

Point2 sample_star_action(const StarSpec& spec, Rng& rng) {
  for (int attempt = 0; attempt < kRejectionCap; ++attempt) {
    // Uniform over the enclosing disk.
    const double r = spec.r_outer * std::sqrt(rng.uniform01());
    const double theta = rng.uniform(0.0, 2.0 * kPi);
    const Point2 p{spec.center[0] + r * std::cos(theta),
                   spec.center[1] + r * std::sin(theta)};
    if (inside_star(spec, p)) return p;
  }
  throw NumericError("sample_star_action: rejection cap of " +
                     std::to_string(kRejectionCap) + " draws exceeded");
}

Point2 warp_to_state(const Point2& a, double gamma) {
  const double r = std::hypot(a[0], a[1]);
  const double phi = gamma * r;
  const double scale = 1.0 + 0.5 * r;
  const double c = std::cos(phi), s = std::sin(phi);
  return {scale * (c * a[0] - s * a[1]), scale * (s * a[0] + c * a[1])};
}

Tensor Dataset::actions() const {
  std::vector<double> v;
  v.reserve(transitions.size() * 2);
  for (const auto& t : transitions) {
    v.push_back(t.a_t[0]);
    v.push_back(t.a_t[1]);
  }
  return Tensor({transitions.size(), 2}, std::move(v));
}

Tensor Dataset::next_states() const {
  std::vector<double> v;
  v.reserve(transitions.size() * 2);
  for (const auto& t : transitions) {
    v.push_back(t.s_next[0]);
    v.push_back(t.s_next[1]);
  }
  return Tensor({transitions.size(), 2}, std::move(v));
}

namespace {

Dataset draw_split(const StarSpec& spec, std::size_t n, std::uint64_t seed,
                   std::uint64_t stream, const std::string& split) {
  Dataset d;
  d.spec = spec;
  d.seed = seed;
  d.split = split;
  Rng rng(derive_seed(seed, stream));
  d.transitions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.s_t = spec.center;
    t.a_t = sample_star_action(spec, rng);
    t.s_next = warp_to_state(t.a_t);
    d.transitions.push_back(t);
  }
  return d;
}

}  // namespace

std::pair<Dataset, Dataset> generate_dataset(const StarSpec& spec,
                                             std::size_t n_train,
                                             std::size_t n_test,
                                             std::uint64_t seed) {
  spec.validate();
  if (n_train < 1 || n_test < 1) {
    throw ContractError("generate_dataset: split sizes must be >= 1");
  }
  return {draw_split(spec, n_train, seed, 0, "train"),
          draw_split(spec, n_test, seed, 1, "test")};
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": not a real number: '" + s + "'");
  }
  return v;
}

std::string dataset_sidecar_path(const std::string& path) {
  return path + ".json";
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "s_t_x,s_t_y,a_x,a_y,s_next_x,s_next_y\n";
  for (const auto& t : d.transitions) {
    out << format_double(t.s_t[0]) << ',' << format_double(t.s_t[1]) << ','
        << format_double(t.a_t[0]) << ',' << format_double(t.a_t[1]) << ','
        << format_double(t.s_next[0]) << ',' << format_double(t.s_next[1])
        << '\n';
  }
  if (!out) throw IoError("write failed for " + path);

  json side;
  side["format_version"] = kDatasetFormatVersion;
  side["split"] = d.split;
  side["seed"] = d.seed;
  side["n"] = d.transitions.size();
  side["rng"] = Rng::kAlgorithm;
  side["warp_gamma"] = kDefaultWarpGamma;
  side["star"] = {{"arms", d.spec.arms},
                  {"r_inner", d.spec.r_inner},
                  {"r_outer", d.spec.r_outer},
                  {"center", d.spec.center},
                  {"rotation", d.spec.rotation}};
  std::ofstream sout(dataset_sidecar_path(path));
  if (!sout) throw IoError("cannot write " + dataset_sidecar_path(path));
  sout << side.dump(2) << "\n";
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) fields.push_back(cur);
  return fields;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("line 1: empty dataset file");
  ++line_no;
  if (line != "s_t_x,s_t_y,a_x,a_y,s_next_x,s_next_y") {
    throw ParseError("line 1: unexpected header '" + line + "'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 6) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 6 fields, got " +
                       std::to_string(fields.size()));
    }
    Transition t;
    t.s_t = {parse_double(fields[0], line_no), parse_double(fields[1], line_no)};
    t.a_t = {parse_double(fields[2], line_no), parse_double(fields[3], line_no)};
    t.s_next = {parse_double(fields[4], line_no), parse_double(fields[5], line_no)};
    d.transitions.push_back(t);
  }

  std::ifstream sin(dataset_sidecar_path(path));
  if (sin) {
    json side;
    try {
      sin >> side;
    } catch (const json::parse_error& e) {
      throw ParseError(dataset_sidecar_path(path) + ": " + e.what());
    }
    d.split = side.value("split", "");
    d.seed = side.value("seed", std::uint64_t{0});
    if (side.contains("star")) {
      const auto& st = side["star"];
      d.spec.arms = st.value("arms", std::size_t{5});
      d.spec.r_inner = st.value("r_inner", 0.35);
      d.spec.r_outer = st.value("r_outer", 1.0);
      if (st.contains("center")) d.spec.center = st["center"].get<Point2>();
      d.spec.rotation = st.value("rotation", 0.0);
    }
  }
  return d;
}

}  // namespace divgen
