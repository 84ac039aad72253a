#include "robust_collect/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "robust_collect/errors.hpp"

namespace robust_collect {

std::string_view to_string(Provenance p) {
  return p == Provenance::InitialOffPolicy ? "InitialOffPolicy" : "Collected";
}

double Episode::discounted_return(double gamma) const {
  double g = 0.0;
  double discount = 1.0;
  for (const auto& s : steps) {
    g += discount * s.reward;
    discount *= gamma;
  }
  return g;
}

double Episode::behavior_log_prob_sum() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.behavior_log_prob;
  return total;
}

std::size_t Dataset::total_steps() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.length();
  return n;
}

std::size_t Dataset::count_steps(Provenance p) const {
  std::size_t n = 0;
  for (const auto& e : episodes) {
    if (e.provenance == p) n += e.length();
  }
  return n;
}

std::size_t Dataset::count_episodes(Provenance p) const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.provenance == p ? 1 : 0;
  return n;
}

Dataset Dataset::prefix(std::size_t n) const {
  Dataset d;
  d.episodes.assign(episodes.begin(), episodes.begin() + static_cast<std::ptrdiff_t>(std::min(n, episodes.size())));
  return d;
}

Dataset Dataset::filter(Provenance p) const {
  Dataset d;
  for (const auto& e : episodes) {
    if (e.provenance == p) d.episodes.push_back(e);
  }
  return d;
}

void Dataset::append(const Dataset& other) {
  episodes.insert(episodes.end(), other.episodes.begin(), other.episodes.end());
}

void write_dataset(std::ostream& os, const Dataset& data, EnvKind kind) {
  os << "# domain " << to_string(kind) << '\n';
  for (std::size_t i = 0; i < data.episodes.size(); ++i) {
    const Episode& ep = data.episodes[i];
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      const Step& s = ep.steps[t];
      os << fmt::format("{},{},{},{},{:.17g},{:.17g},{}\n", i, t, state_repr(s.state),
                        action_repr(s.action), s.reward, s.behavior_log_prob,
                        to_string(ep.provenance));
    }
  }
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  // strtod handles the full round-trip precision and inf/nan spellings.
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError(fmt::format("dataset: bad number '{}'", s));
  return v;
}

long parse_int(const std::string& s) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(fmt::format("dataset: bad integer '{}'", s));
  }
  return v;
}

}  // namespace

Dataset read_dataset(std::istream& is, EnvKind* kind_out) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# domain ", 0) != 0) {
    throw ConfigError("dataset: missing '# domain' header");
  }
  const EnvKind kind = parse_env_kind(line.substr(9));
  if (kind_out) *kind_out = kind;
  const std::size_t state_fields =
      kind == EnvKind::MultiBandit ? 1 : (kind == EnvKind::GridWorld ? 2 : 4);

  Dataset data;
  long current = -1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_commas(line);
    if (f.size() != 6 + state_fields) {
      throw ConfigError(fmt::format("dataset: expected {} fields, got {} in '{}'",
                                    6 + state_fields, f.size(), line));
    }
    const long ep = parse_int(f[0]);
    const long t = parse_int(f[1]);
    if (ep != current) {
      if (ep != current + 1 || t != 0) throw ConfigError("dataset: episodes out of order");
      data.episodes.emplace_back();
      current = ep;
    }
    Episode& episode = data.episodes.back();
    if (t != static_cast<long>(episode.steps.size())) throw ConfigError("dataset: steps out of order");

    Step step;
    step.state.t = static_cast<int>(t);
    switch (kind) {
      case EnvKind::MultiBandit: step.state.value = BanditUnit{}; break;
      case EnvKind::GridWorld:
        step.state.value = GridCell{static_cast<int>(parse_int(f[2])), static_cast<int>(parse_int(f[3]))};
        break;
      default:
        step.state.value = CartState{parse_double(f[2]), parse_double(f[3]), parse_double(f[4]),
                                     parse_double(f[5])};
    }
    const std::size_t k = 2 + state_fields;
    step.action = kind == EnvKind::CartPoleContinuous ? Action::continuous(parse_double(f[k]))
                                                      : Action::discrete(static_cast<int>(parse_int(f[k])));
    step.reward = parse_double(f[k + 1]);
    step.behavior_log_prob = parse_double(f[k + 2]);
    const std::string& prov = f[k + 3];
    if (prov == "InitialOffPolicy") {
      episode.provenance = Provenance::InitialOffPolicy;
    } else if (prov == "Collected") {
      episode.provenance = Provenance::Collected;
    } else {
      throw ConfigError(fmt::format("dataset: unknown provenance '{}'", prov));
    }
    episode.steps.push_back(std::move(step));
  }
  return data;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data, EnvKind kind) {
  std::ofstream os(path);
  if (!os) throw ConfigError(fmt::format("cannot write dataset '{}'", path.string()));
  write_dataset(os, data, kind);
}

Dataset load_dataset(const std::filesystem::path& path, EnvKind* kind_out) {
  std::ifstream is(path);
  if (!is) throw ConfigError(fmt::format("cannot open dataset '{}'", path.string()));
  return read_dataset(is, kind_out);
}

}  // namespace robust_collect
