#include "lqrlab/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "lqrlab/adp.hpp"
#include "lqrlab/errors.hpp"
#include "lqrlab/io.hpp"
#include "lqrlab/policysearch.hpp"
#include "lqrlab/sysid.hpp"

namespace lqrlab::bench {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MatrixXd diag(std::initializer_list<double> values) {
  VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v.asDiagonal();
}

// Reads config[key] as T, falling back to `fallback` when absent.
template <typename T>
T get_or(const json& config, const char* key, T fallback) {
  if (!config.contains(key)) return fallback;
  try {
    return config.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

MatrixXd gain_or_empty(const json& config) {
  if (!config.contains("initial_gain")) return {};
  return io::matrix_from_json(config.at("initial_gain"), "initial_gain");
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"nominal", {"excitation_std", "ridge"}},
      {"lspi",
       {"gamma", "samples_per_iter", "exploration_std", "ridge", "initial_gain"}},
      {"q-learning", {"gamma", "eta", "epsilon", "exploration_std"}},
      {"reinforce",
       {"exploration_std", "step", "batch_size", "baseline", "adaptive", "beta1",
        "beta2", "eps_reg", "initial_gain"}},
      {"random-search",
       {"sigma", "step", "directions", "whitening", "reward_scaling",
        "initial_gain"}},
  };
  return keys;
}

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "inf" || s == "+inf") return kInf;
  if (s == "-inf") return -kInf;
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("malformed number '" + s + "'");
  return x;
}

}  // namespace

LqrInstance instance_double_integrator(double r0, double noise_var,
                                       int episode_len) {
  LQRLAB_REQUIRE(r0 > 0.0, "r0 must be positive");
  LQRLAB_REQUIRE(noise_var >= 0.0, "noise variance must be nonnegative");
  MatrixXd A(2, 2);
  A << 1, 1, 0, 1;
  MatrixXd B(2, 1);
  B << 0, 1;
  VectorXd x0(2);
  x0 << -1, 0;
  return LqrInstance(LinearSystem(A, B, noise_var * MatrixXd::Identity(2, 2)),
                     QuadraticCost(diag({1, 0}), MatrixXd::Constant(1, 1, r0)),
                     x0, episode_len);
}

LqrInstance instance_laplacian(double r_scale, double noise_var, int episode_len) {
  LQRLAB_REQUIRE(r_scale > 0.0, "r_scale must be positive");
  LQRLAB_REQUIRE(noise_var >= 0.0, "noise variance must be nonnegative");
  MatrixXd A(3, 3);
  A << 1.01, 0.01, 0, 0.01, 1.01, 0.01, 0, 0.01, 1.01;
  const MatrixXd I = MatrixXd::Identity(3, 3);
  return LqrInstance(LinearSystem(A, I, noise_var * I),
                     QuadraticCost(I, r_scale * I), VectorXd::Ones(3), episode_len);
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"nominal", "lspi", "q-learning",
                                                 "reinforce", "random-search"};
  return names;
}

void validate_method(const MethodSpec& method) {
  const auto it = allowed_keys().find(method.name);
  if (it == allowed_keys().end())
    throw ConfigError("unknown method '" + method.name + "'");
  if (!method.config.is_object())
    throw ConfigError("config for '" + method.name + "' must be an object");
  for (const auto& [key, value] : method.config.items())
    if (!it->second.count(key))
      throw ConfigError("unknown config field '" + key + "' for method '" +
                        method.name + "'");
}

MethodOutcome run_method(const MethodSpec& method, const LqrInstance& instance,
                         std::int64_t budget_cap, Rng& rng) {
  validate_method(method);
  const json& cfg = method.config;
  const std::int64_t L = instance.episode_len;
  EpisodeBudget budget(budget_cap);
  MethodOutcome out;

  if (method.name == "nominal") {
    const int episodes = static_cast<int>(budget_cap / L);
    if (episodes >= 1) {
      try {
        auto res = nominal_pipeline(budget, instance, episodes,
                                    get_or(cfg, "excitation_std", 1.0), rng,
                                    get_or(cfg, "ridge", 0.0));
        out.gain = std::move(res.gain);
      } catch (const InsufficientExcitation&) {
      }
    }
  } else if (method.name == "lspi") {
    LspiConfig c;
    c.gamma = get_or(cfg, "gamma", c.gamma);
    c.samples_per_iter = get_or(cfg, "samples_per_iter", static_cast<int>(L));
    c.exploration_std = get_or(cfg, "exploration_std", c.exploration_std);
    c.ridge = get_or(cfg, "ridge", c.ridge);
    c.initial_gain = gain_or_empty(cfg);
    if (c.samples_per_iter < 1) throw ConfigError("samples_per_iter must be >= 1");
    c.n_iters = static_cast<int>(budget_cap / c.samples_per_iter);
    auto res = lspi(budget, instance, c, rng);
    if (!res.failed && c.n_iters > 0) out.gain = res.final_gain();
  } else if (method.name == "q-learning") {
    QLearningConfig c;
    c.gamma = get_or(cfg, "gamma", c.gamma);
    c.eta = get_or(cfg, "eta", c.eta);
    c.epsilon = get_or(cfg, "epsilon", c.epsilon);
    c.exploration_std = get_or(cfg, "exploration_std", c.exploration_std);
    c.n_episodes = static_cast<int>(budget_cap / L);
    auto res = q_learning_train(budget, instance, c, rng);
    if (!res.failed) out.gain = res.gain;
  } else if (method.name == "reinforce") {
    ReinforceConfig c;
    c.exploration_std = get_or(cfg, "exploration_std", c.exploration_std);
    c.step = get_or(cfg, "step", c.step);
    c.batch_size = get_or(cfg, "batch_size", c.batch_size);
    c.baseline = get_or(cfg, "baseline", c.baseline);
    c.adaptive = get_or(cfg, "adaptive", c.adaptive);
    c.beta1 = get_or(cfg, "beta1", c.beta1);
    c.beta2 = get_or(cfg, "beta2", c.beta2);
    c.eps_reg = get_or(cfg, "eps_reg", c.eps_reg);
    c.initial_gain = gain_or_empty(cfg);
    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    c.n_iters = static_cast<int>(budget_cap / (c.batch_size * L));
    out.gain = reinforce_train(budget, instance, c, rng).final_gain;
  } else if (method.name == "random-search") {
    RandomSearchConfig c;
    c.sigma = get_or(cfg, "sigma", c.sigma);
    c.step = get_or(cfg, "step", c.step);
    c.directions = get_or(cfg, "directions", c.directions);
    c.whitening = get_or(cfg, "whitening", c.whitening);
    c.reward_scaling = get_or(cfg, "reward_scaling", c.reward_scaling);
    c.initial_gain = gain_or_empty(cfg);
    if (c.directions < 1) throw ConfigError("directions must be >= 1");
    c.n_iters = static_cast<int>(budget_cap / (2 * c.directions * L));
    out.gain = random_search_train(budget, instance, c, rng).final_gain;
  }
  out.samples = budget.samples_used();
  return out;
}

double extended_median(std::vector<double> values) {
  LQRLAB_REQUIRE(!values.empty(), "median of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  if (n % 2 == 1) return values[n / 2];
  const double lo = values[n / 2 - 1], hi = values[n / 2];
  if (std::isinf(hi)) return hi;
  return 0.5 * (lo + hi);
}

ResultTable::ResultTable(std::vector<RunRecord> records)
    : records_(std::move(records)) {
  std::vector<std::pair<std::string, std::int64_t>> order;
  std::map<std::pair<std::string, std::int64_t>, std::vector<const RunRecord*>> groups;
  for (const auto& r : records_) {
    if (std::isinf(r.cost) && r.stabilized)
      throw ConfigError("record marked stabilized with failure sentinel cost");
    auto key = std::make_pair(r.method, r.samples);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  for (const auto& key : order) {
    const auto& group = groups[key];
    std::vector<double> costs;
    int stabilized = 0;
    for (const auto* r : group) {
      costs.push_back(r->cost);
      stabilized += r->stabilized ? 1 : 0;
    }
    Summary s;
    s.method = key.first;
    s.samples = key.second;
    s.median = extended_median(costs);
    s.min = *std::min_element(costs.begin(), costs.end());
    s.max = *std::max_element(costs.begin(), costs.end());
    s.n = static_cast<int>(group.size());
    s.stabilized_fraction = static_cast<double>(stabilized) / s.n;
    summaries_.push_back(s);
  }
}

const Summary* ResultTable::find(const std::string& method,
                                 std::int64_t samples) const {
  for (const auto& s : summaries_)
    if (s.method == method && s.samples == samples) return &s;
  return nullptr;
}

std::vector<Summary> ResultTable::summaries_for(const std::string& method) const {
  std::vector<Summary> out;
  for (const auto& s : summaries_)
    if (s.method == method) out.push_back(s);
  std::sort(out.begin(), out.end(),
            [](const Summary& a, const Summary& b) { return a.samples < b.samples; });
  return out;
}

std::uint64_t cell_seed(std::uint64_t seed_base, std::size_t method_index, int seed,
                        std::size_t budget_index) {
  return derive_seed({seed_base, static_cast<std::uint64_t>(method_index),
                      static_cast<std::uint64_t>(static_cast<std::int64_t>(seed)),
                      static_cast<std::uint64_t>(budget_index)});
}

ResultTable run_experiment(const ExperimentSpec& spec) {
  if (spec.methods.empty()) throw ConfigError("experiment needs at least one method");
  if (spec.seeds.empty()) throw ConfigError("experiment needs at least one seed");
  if (spec.budgets.empty()) throw ConfigError("experiment needs at least one budget");
  for (std::size_t i = 0; i < spec.budgets.size(); ++i) {
    if (spec.budgets[i] < 1) throw ConfigError("budgets must be positive");
    if (i > 0 && spec.budgets[i] <= spec.budgets[i - 1])
      throw ConfigError("budgets must be strictly increasing");
  }
  for (const auto& m : spec.methods) validate_method(m);

  std::vector<RunRecord> records;
  for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
    const auto& method = spec.methods[mi];
    for (int seed : spec.seeds) {
      for (std::size_t bi = 0; bi < spec.budgets.size(); ++bi) {
        Rng rng(cell_seed(spec.seed_base, mi, seed, bi));
        const auto outcome = run_method(method, spec.instance, spec.budgets[bi], rng);
        RunRecord rec;
        rec.method = method.name;
        rec.seed = seed;
        rec.samples = outcome.samples;
        rec.cost = outcome.gain ? evaluate_gain(spec.instance, *outcome.gain) : kInf;
        rec.stabilized = std::isfinite(rec.cost);
        records.push_back(std::move(rec));
      }
    }
  }
  return ResultTable(std::move(records));
}

std::map<std::pair<std::string, std::int64_t>, double> stabilization_fraction(
    const ResultTable& table) {
  LQRLAB_REQUIRE(!table.records().empty(), "result table is empty");
  std::map<std::pair<std::string, std::int64_t>, double> out;
  for (const auto& s : table.summaries())
    out[{s.method, s.samples}] = s.stabilized_fraction;
  return out;
}

std::optional<std::int64_t> samples_to_reach(const ResultTable& table,
                                             const std::string& method,
                                             double threshold) {
  for (const auto& s : table.summaries_for(method))
    if (s.median <= threshold) return s.samples;
  return std::nullopt;
}

std::string emit_csv(const ResultTable& table) {
  std::string out = "method,seed,samples,cost,stabilized\n";
  for (const auto& r : table.records()) {
    out += r.method;
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += std::to_string(r.samples);
    out += ',';
    out += format_double(r.cost);
    out += ',';
    out += r.stabilized ? "true" : "false";
    out += '\n';
  }
  return out;
}

ResultTable parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "method,seed,samples,cost,stabilized")
    throw ConfigError("CSV header must be 'method,seed,samples,cost,stabilized'");
  std::vector<RunRecord> records;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5)
      throw ConfigError("CSV line " + std::to_string(lineno) + ": expected 5 fields");
    RunRecord r;
    r.method = fields[0];
    try {
      r.seed = std::stoi(fields[1]);
      r.samples = std::stoll(fields[2]);
    } catch (const std::exception&) {
      throw ConfigError("CSV line " + std::to_string(lineno) + ": bad integer");
    }
    r.cost = parse_double(fields[3]);
    if (fields[4] != "true" && fields[4] != "false")
      throw ConfigError("CSV line " + std::to_string(lineno) + ": bad flag");
    r.stabilized = fields[4] == "true";
    records.push_back(std::move(r));
  }
  return ResultTable(std::move(records));
}

ResultTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

PlotMetric parse_metric(const std::string& name) {
  if (name == "cost") return PlotMetric::kCost;
  if (name == "stabilization") return PlotMetric::kStabilization;
  throw ConfigError("unknown metric '" + name + "' (expected cost|stabilization)");
}

std::string emit_plot(const ResultTable& table, PlotMetric metric) {
  constexpr double kW = 720, kH = 440, kLeft = 70, kRight = 170, kTop = 30,
                   kBottom = 50;
  const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};

  std::vector<std::string> methods;
  for (const auto& s : table.summaries())
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end())
      methods.push_back(s.method);

  // Axis ranges. Costs are drawn on log10; failures clip to the top edge.
  double x_lo = 1, x_hi = 10, y_lo = 0, y_hi = 1;
  bool any = false;
  double cmin = kInf, cmax = 0;
  for (const auto& s : table.summaries()) {
    if (s.samples <= 0) continue;
    const double lx = std::log10(static_cast<double>(s.samples));
    if (!any) x_lo = x_hi = lx;
    x_lo = std::min(x_lo, lx);
    x_hi = std::max(x_hi, lx);
    any = true;
    for (double c : {s.min, s.median, s.max})
      if (std::isfinite(c) && c > 0) {
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
      }
  }
  x_lo = std::floor(x_lo);
  x_hi = std::max(std::ceil(x_hi), x_lo + 1);
  if (metric == PlotMetric::kCost) {
    if (cmax > 0) {
      y_lo = std::floor(std::log10(cmin));
      y_hi = std::max(std::ceil(std::log10(cmax)), y_lo + 1);
    }
  }

  auto px = [&](double samples) {
    return kLeft + (std::log10(samples) - x_lo) / (x_hi - x_lo) * plot_w;
  };
  auto py = [&](double value) {
    double v = value;
    if (metric == PlotMetric::kCost)
      v = std::isfinite(value) && value > 0 ? std::log10(value) : y_hi;
    v = std::clamp(v, y_lo, y_hi);
    return kTop + (1.0 - (v - y_lo) / (y_hi - y_lo)) * plot_h;
  };

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double e = x_lo; e <= x_hi + 1e-9; e += 1) {
    const double x = kLeft + (e - x_lo) / (x_hi - x_lo) * plot_w;
    svg << "<line x1=\"" << x << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << x
        << "\" y2=\"" << kTop + plot_h + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\">1e" << static_cast<int>(e) << "</text>\n";
  }
  const int y_ticks = metric == PlotMetric::kCost ? static_cast<int>(y_hi - y_lo) : 4;
  for (int i = 0; i <= y_ticks; ++i) {
    const double v = y_lo + (y_hi - y_lo) * i / y_ticks;
    const double y = kTop + (1.0 - (v - y_lo) / (y_hi - y_lo)) * plot_h;
    svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << y << "\" x2=\"" << kLeft
        << "\" y2=\"" << y << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\">";
    if (metric == PlotMetric::kCost)
      svg << "1e" << static_cast<int>(std::lround(v));
    else
      svg << std::setprecision(2) << v;
    svg << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kH - 10
      << "\" text-anchor=\"middle\">samples</text>\n";
  svg << "<text x=\"15\" y=\"" << kTop + plot_h / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << kTop + plot_h / 2
      << ")\">"
      << (metric == PlotMetric::kCost ? "average cost" : "fraction stabilizing")
      << "</text>\n";

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const char* color = kColors[mi % 6];
    std::vector<Summary> rows;
    for (const auto& s : table.summaries_for(methods[mi]))
      if (s.samples > 0) rows.push_back(s);
    if (rows.empty()) continue;
    if (metric == PlotMetric::kCost) {
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" points=\"";
      for (const auto& s : rows) svg << px(s.samples) << ',' << py(s.max) << ' ';
      for (auto it = rows.rbegin(); it != rows.rend(); ++it)
        svg << px(it->samples) << ',' << py(it->min) << ' ';
      svg << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& s : rows)
      svg << px(s.samples) << ','
          << py(metric == PlotMetric::kCost ? s.median : s.stabilized_fraction)
          << ' ';
    svg << "\"/>\n";
    const double ly = kTop + 10 + 18 * static_cast<double>(mi);
    svg << "<line x1=\"" << kW - kRight + 15 << "\" y1=\"" << ly << "\" x2=\""
        << kW - kRight + 40 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kW - kRight + 46 << "\" y=\"" << ly + 4 << "\">"
        << methods[mi] << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

ExperimentSpec experiment_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("spec document must be an object");
  auto instance = [&]() -> LqrInstance {
    if (!j.contains("preset")) return io::instance_from_json(j);
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "double_integrator")
      return instance_double_integrator(get_or(j, "r0", 1.0),
                                        get_or(j, "noise_var", 1e-4),
                                        get_or(j, "episode_len", 10));
    if (preset == "laplacian")
      return instance_laplacian(get_or(j, "r_scale", 1000.0),
                                get_or(j, "noise_var", 1e-4),
                                get_or(j, "episode_len", 6));
    throw ConfigError("unknown preset '" + preset + "'");
  }();

  ExperimentSpec spec{std::move(instance), {}, {}, {}, 0};
  if (!j.contains("methods") || !j.at("methods").is_array())
    throw ConfigError("spec needs a 'methods' list");
  for (const auto& m : j.at("methods")) {
    MethodSpec ms;
    if (m.is_string()) {
      ms.name = m.get<std::string>();
    } else if (m.is_object() && m.contains("name")) {
      ms.name = m.at("name").get<std::string>();
      ms.config = m.value("config", json::object());
    } else {
      throw ConfigError("method entries must be names or {name, config} objects");
    }
    validate_method(ms);
    spec.methods.push_back(std::move(ms));
  }
  if (j.contains("seeds")) {
    spec.seeds = j.at("seeds").get<std::vector<int>>();
  } else {
    for (int s = 0; s < 10; ++s) spec.seeds.push_back(s);
  }
  if (!j.contains("budgets")) throw ConfigError("spec needs a 'budgets' list");
  spec.budgets = j.at("budgets").get<std::vector<std::int64_t>>();
  spec.seed_base = get_or<std::uint64_t>(j, "seed_base", 0);
  return spec;
}

}  // namespace lqrlab::bench
