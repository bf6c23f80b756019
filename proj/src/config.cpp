#include "hct/config.hpp"

#include <fstream>
#include <sstream>
#include <toml.hpp>

namespace hct {

namespace {

template <class T>
T get(const toml::node_view<const toml::node>& v, T fallback) {
  if (!v) return fallback;
  if constexpr (std::is_same_v<T, double>) {
    if (auto d = v.value<double>()) return *d;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto b = v.value<bool>()) return *b;
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto s = v.value<std::string>()) return *s;
  } else {
    if (auto i = v.value<std::int64_t>()) return T(*i);
  }
  std::ostringstream os;
  os << "config key has the wrong type near line " << v.node()->source().begin.line;
  throw ConfigError(os.str());
}

std::vector<double> get_list(const toml::node_view<const toml::node>& v, std::vector<double> fallback) {
  if (!v) return fallback;
  const toml::array* a = v.as_array();
  if (!a) return {get<double>(v, 0.0)};
  std::vector<double> out;
  for (const auto& e : *a) {
    if (auto d = e.value<double>()) out.push_back(*d);
    else throw ConfigError("config list must hold numbers");
  }
  return out;
}

Point get_point(const toml::node_view<const toml::node>& v, Point fallback) {
  const auto l = get_list(v, {fallback[0], fallback[1]});
  if (l.empty() || l.size() > 2) throw ConfigError("config point must have 1 or 2 entries");
  return {l[0], l.size() > 1 ? l[1] : fallback[1]};
}

PotentialKind potential_kind(const std::string& s) {
  if (s == "free") return PotentialKind::Free;
  if (s == "harmonic") return PotentialKind::Harmonic;
  if (s == "slits") return PotentialKind::Slits;
  if (s == "biprism") return PotentialKind::Biprism;
  if (s == "coupling") return PotentialKind::Coupling;
  throw ConfigError("unknown potential kind '" + s + "'");
}

ScenarioKind scenario_kind(const std::string& s) {
  if (s == "two-slit") return ScenarioKind::TwoSlit;
  if (s == "measurement") return ScenarioKind::Measurement;
  if (s == "free") return ScenarioKind::Free;
  if (s == "harmonic") return ScenarioKind::Harmonic;
  if (s == "lattice") return ScenarioKind::Lattice;
  throw ConfigError("unknown scenario kind '" + s + "'");
}

ProposalSpec read_proposal(const toml::node_view<const toml::node>& t, const std::string& prefix, ProposalSpec p) {
  const std::string pos = get<std::string>(t["position"], "born");
  if (pos == "born") p.position = ProposalSpec::Position::Born;
  else if (pos == "uniform") p.position = ProposalSpec::Position::UniformSupport;
  else throw ConfigError("proposal position must be 'born' or 'uniform'");
  p.vmin = get_point(t[prefix + "vmin"], p.vmin);
  p.vmax = get_point(t[prefix + "vmax"], p.vmax);
  p.N = get<Index>(t["N"], p.N);
  return p;
}

}  // namespace

std::string kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::TwoSlit: return "two-slit";
    case ScenarioKind::Measurement: return "measurement";
    case ScenarioKind::Free: return "free";
    case ScenarioKind::Harmonic: return "harmonic";
    case ScenarioKind::Lattice: return "lattice";
  }
  return "?";
}

ScenarioConfig parse_config(const std::string& text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config parse error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
  const toml::node_view<const toml::node> tv{static_cast<const toml::node&>(root)};
  ScenarioConfig c;

  const auto run = tv["run"];
  c.name = get<std::string>(run["name"], "scenario");
  c.kind = scenario_kind(get<std::string>(run["kind"], "free"));

  const auto grid = tv["grid"];
  const auto lo = get_list(grid["lo"], {}), hi = get_list(grid["hi"], {}), n = get_list(grid["n"], {});
  if (lo.empty() || lo.size() > 2 || lo.size() != hi.size() || lo.size() != n.size())
    throw ConfigError("[grid] lo, hi and n must have matching length 1 or 2");
  c.grid.dim = int(lo.size());
  for (std::size_t a = 0; a < lo.size(); ++a) {
    c.grid.lo[a] = lo[a];
    c.grid.hi[a] = hi[a];
    c.grid.n[a] = Index(n[a]);
  }

  const auto ph = tv["physics"];
  c.phys.hbar = get<double>(ph["hbar"], 1.0);
  c.phys.mass = get_point(ph["mass"], {1.0, 1.0});
  if (c.grid.dim == 2 && get_list(ph["mass"], {1.0, 1.0}).size() == 1) c.phys.mass[1] = c.phys.mass[0];
  c.phys.dt = get<double>(ph["dt"], 1e-3);
  c.phys.T = get<double>(ph["T"], 1.0);

  if (const toml::array* terms = tv["potential"]["term"].as_array()) {
    for (const auto& node : *terms) {
      const toml::node_view<const toml::node> t{node};
      PotentialTerm p;
      p.kind = potential_kind(get<std::string>(t["kind"], "free"));
      p.axis = get<int>(t["axis"], 0);
      p.center = get<double>(t["center"], 0.0);
      p.omega = get<double>(t["omega"], 0.0);
      p.mass = get<double>(t["mass"], c.phys.mass[std::size_t(p.axis)]);
      p.strength = get<double>(t["strength"], 0.0);
      p.width = get<double>(t["width"], 1.0);
      p.separation = get<double>(t["separation"], 0.0);
      p.band = get<double>(t["band"], 0.0);
      p.band_center = get<double>(t["band_center"], 0.0);
      p.t_on = get<double>(t["t_on"], p.t_on);
      p.t_off = get<double>(t["t_off"], p.t_off);
      c.potential.terms.push_back(p);
      c.field_terms.push_back(get<bool>(t["field"], false));
    }
  }

  if (const toml::array* comps = tv["packet"]["component"].as_array()) {
    for (const auto& node : *comps) {
      const toml::node_view<const toml::node> t{node};
      PacketComponent pc;
      const auto cf = get_list(t["coeff"], {1.0, 0.0});
      pc.coeff = {cf[0], cf.size() > 1 ? cf[1] : 0.0};
      pc.center = get_point(t["center"], pc.center);
      pc.momentum = get_point(t["momentum"], pc.momentum);
      pc.sigma = get_point(t["sigma"], pc.sigma);
      c.packet.push_back(pc);
    }
  }

  const auto prop = tv["proposal"];
  c.proposal = read_proposal(prop, "", c.proposal);
  if (prop["alt_vmin"] || prop["alt_vmax"]) c.alt_proposal = read_proposal(prop, "alt_", c.proposal);

  const auto det = tv["detector"];
  const auto bc = get_list(det["bin_cells"], {1.0, 1.0});
  c.detector.bin_cells = {Index(bc[0]), bc.size() > 1 ? Index(bc[1]) : 1};
  c.detector.coarse_width = get<double>(det["coarse_width"], 0.0);
  c.detector.velocity_bins = get<Index>(det["velocity_bins"], 200);
  c.detector.fringe_window = get<double>(det["fringe_window"], 0.0);

  c.seed = get<std::uint64_t>(run["seed"], 1);
  c.proposal.seed = c.seed;
  if (c.alt_proposal) c.alt_proposal->seed = c.seed;
  c.out = get<std::string>(run["out"], "runs/" + c.name);
  c.record_every = get<Index>(run["record_every"], 1);
  c.n_min = get<Index>(run["n_min"], 20);
  c.bohm_N = get<Index>(run["bohm_N"], 10000);
  c.bohm_bins = get<Index>(run["bohm_bins"], 50);
  c.checkpoints = get_list(run["checkpoints"], {});
  c.chain_max = get<Index>(run["chain_max"], 4);
  c.bootstrap = get<Index>(run["bootstrap"], 200);
  c.snapshot_every = get<Index>(run["snapshot_every"], 0);
  c.field = get<bool>(run["field"], true);
  c.disjoint.eps_cell = get<double>(run["eps_cell"], c.disjoint.eps_cell);
  c.disjoint.gap_cells = get<Index>(run["gap_cells"], c.disjoint.gap_cells);
  c.disjoint.eps_branch = get<double>(run["eps_branch"], c.disjoint.eps_branch);
  c.disjoint.eps_leak = get<double>(run["eps_leak"], c.disjoint.eps_leak);
  c.disjoint.persistence = get<bool>(run["persistence"], true);

  c.lattice.eps = get<double>(run["lattice_eps"], c.lattice.eps);
  c.lattice.n_slices = get<Index>(run["n_slices"], c.lattice.n_slices);
  c.lattice.t2_slice = get<Index>(run["t2_slice"], c.lattice.t2_slice);
  c.lattice.x1 = get<double>(run["x1"], 0.0);
  c.lattice.x3 = get<double>(run["x3"], 0.0);
  c.lattice.margins = get_list(run["margins"], {});

  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void ScenarioConfig::validate() const {
  grid.validate();
  potential.validate(grid);
  disjoint.validate();
  if (kind == ScenarioKind::Lattice) {
    if (grid.dim != 1) throw ConfigError("lattice scenarios are 1D");
    if (!(phys.dt > 0.0) || lattice.eps < 0.0) throw ConfigError("lattice needs dt > 0 and eps >= 0");
    if (lattice.n_slices < 2 || lattice.t2_slice <= 0 || lattice.t2_slice >= lattice.n_slices)
      throw ConfigError("lattice needs 0 < t2_slice < n_slices");
    return;
  }
  phys.validate(grid);
  if (packet.empty()) throw ConfigError("[packet] needs at least one component");
  if (record_every < 1 || phys.steps() % record_every != 0)
    throw ConfigError("record_every must divide the step count");
  if (kind == ScenarioKind::Measurement && grid.dim != 2) throw ConfigError("measurement scenario needs a 2D grid");
  if (kind == ScenarioKind::TwoSlit && grid.dim != 1) throw ConfigError("two-slit scenario is 1D");
  for (double t : checkpoints) {
    const double k = t / (phys.dt * double(record_every));
    if (std::abs(k - std::round(k)) > 1e-9 || t < 0.0 || t > phys.T)
      throw ConfigError("checkpoints must be record times within [0, T]");
  }
  if (detector.bin_cells[0] < 1 || detector.bin_cells[1] < 1) throw ConfigError("detector bin_cells must be >= 1");
  if (detector.velocity_bins < 1) throw ConfigError("velocity_bins must be >= 1");
  if (chain_max < 1) throw ConfigError("chain_max must be >= 1");
  if (proposal.N < 1) throw ConfigError("proposal N must be positive");
  for (int a = 0; a < grid.dim; ++a) {
    if (!(proposal.vmax[a] > proposal.vmin[a])) throw ConfigError("proposal needs vmin < vmax");
    if (alt_proposal && !(alt_proposal->vmax[a] > alt_proposal->vmin[a]))
      throw ConfigError("alternate proposal needs vmin < vmax");
  }
  // leakage: the initial packet must sit inside the grid to within eps_leak
  const WaveFunction psi0 = initial_state(*this);
  if (edge_mass(psi0, disjoint.gap_cells + 1) > disjoint.eps_leak)
    throw ConfigError("initial packet leaks through the grid edge");
}

PotentialSpec effective_potential(const ScenarioConfig& cfg) {
  PotentialSpec v = cfg.potential;
  for (std::size_t i = 0; i < v.terms.size(); ++i)
    if (i < cfg.field_terms.size() && cfg.field_terms[i]) v.terms[i].on = cfg.field;
  return v;
}

WaveFunction initial_state(const ScenarioConfig& cfg) {
  WaveFunction psi{cfg.grid, Eigen::ArrayXcd::Zero(cfg.grid.size()), 0.0};
  for (const auto& pc : cfg.packet)
    psi.amps += pc.coeff * init_gaussian(cfg.grid, pc.center, pc.momentum, pc.sigma, cfg.phys.hbar).amps;
  normalize(psi);
  return psi;
}

void set_field(ScenarioConfig& cfg, bool on) { cfg.field = on; }

void set_seed(ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.proposal.seed = seed;
  if (cfg.alt_proposal) cfg.alt_proposal->seed = seed;
}

}  // namespace hct
