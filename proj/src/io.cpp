#include "hct/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

namespace hct {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'H', 'C', 'T', 'P', 'S', 'I', '1', '\0'};

template <class T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ArgumentError("truncated wave function file");
  return v;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json rects_json(const std::vector<Rect>& rs) {
  json a = json::array();
  for (const Rect& r : rs) a.push_back({r.i0, r.i1, r.j0, r.j1});
  return a;
}

}  // namespace

void write_psi(const fs::path& path, const WaveFunction& psi) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("cannot write " + path.string());
  os.write(kMagic, sizeof kMagic);
  const SpatialGrid& g = psi.grid;
  put<std::int32_t>(os, g.dim);
  for (int a = 0; a < 2; ++a) put<std::int64_t>(os, g.n[std::size_t(a)]);
  for (int a = 0; a < 2; ++a) put(os, g.lo[std::size_t(a)]);
  for (int a = 0; a < 2; ++a) put(os, g.hi[std::size_t(a)]);
  put(os, psi.time);
  os.write(reinterpret_cast<const char*>(psi.amps.data()), std::streamsize(sizeof(cplx) * std::size_t(psi.amps.size())));
}

WaveFunction read_psi(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot read " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw ArgumentError("not a wave function file");
  WaveFunction psi;
  psi.grid.dim = get<std::int32_t>(is);
  for (int a = 0; a < 2; ++a) psi.grid.n[std::size_t(a)] = Index(get<std::int64_t>(is));
  for (int a = 0; a < 2; ++a) psi.grid.lo[std::size_t(a)] = get<double>(is);
  for (int a = 0; a < 2; ++a) psi.grid.hi[std::size_t(a)] = get<double>(is);
  psi.grid.validate();
  psi.time = get<double>(is);
  psi.amps.resize(psi.grid.size());
  is.read(reinterpret_cast<char*>(psi.amps.data()), std::streamsize(sizeof(cplx) * std::size_t(psi.amps.size())));
  if (!is) throw ArgumentError("truncated wave function file");
  return psi;
}

json checks_json(const std::vector<Check>& checks) {
  json a = json::array();
  for (const Check& c : checks)
    a.push_back({{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"above", c.above}, {"pass", c.pass()}});
  return a;
}

json tree_json(const BranchTree& t) {
  json j;
  j["confirmed"] = t.confirmed;
  j["root"] = t.root;
  j["grid"] = {{"dim", t.grid.dim}, {"n", t.grid.n}, {"lo", t.grid.lo}, {"hi", t.grid.hi}};
  j["params"] = {{"eps_cell", t.params.eps_cell},     {"gap_cells", t.params.gap_cells},
                 {"eps_branch", t.params.eps_branch}, {"eps_leak", t.params.eps_leak},
                 {"persistence", t.params.persistence}};
  j["record_times"] = t.record_times;
  json nodes = json::array();
  for (const PDINode& n : t.nodes) {
    json sup = json::array();
    for (std::size_t s = 0; s < n.support_history.size(); ++s) {
      const EpsSupport& e = n.support_history[s];
      sup.push_back({{"k", n.birth + Index(s)}, {"mass", e.mass}, {"rects", rects_json(e.rects)}});
    }
    nodes.push_back({{"id", n.id},
                     {"parent", n.parent},
                     {"children", n.children},
                     {"birth", n.birth},
                     {"last", n.last},
                     {"birth_time", n.birth_time},
                     {"packet_mass", n.packet_mass},
                     {"supports", sup}});
  }
  j["nodes"] = nodes;
  j["leaves"] = t.leaves();
  return j;
}

json born_json(const std::vector<BornRow>& rows) {
  json a = json::array();
  for (const BornRow& r : rows)
    a.push_back({{"node", r.node}, {"time", r.time}, {"mu", r.mu}, {"born", r.born}, {"delta", r.delta()}});
  return a;
}

json chains_json(const std::vector<ChainRow>& rows) {
  json a = json::array();
  for (const ChainRow& r : rows) {
    json c = json::array();
    for (const ChainElement& e : r.chain) c.push_back({e.node, e.k});
    a.push_back({{"chain", c}, {"ordered", r.ordered}, {"value", r.value}});
  }
  return a;
}

json ia_json(const IAReport& r) {
  return {{"vmin", r.vmin},
          {"vmax", r.vmax},
          {"tv_weighted", r.tv_weighted},
          {"tv_unconditional", r.tv_unconditional},
          {"noise_floor", r.noise_floor},
          {"unconditional_on", r.unconditional_on},
          {"unconditional_off", r.unconditional_off},
          {"weighted_on", r.weighted_on},
          {"weighted_off", r.weighted_off}};
}

json lattice_json(const LatticeReport& r) {
  json sweep = json::array();
  for (const SweepRow& s : r.sweep)
    sweep.push_back({{"margin", s.margin}, {"deviation", s.deviation}, {"complement", s.complement}});
  const Conjecture1Report& w = r.window;
  return {{"x1", r.kernel.grid.coord(0, r.i1)},
          {"x3", r.kernel.grid.coord(0, r.i3)},
          {"dt", r.kernel.dt},
          {"eps", r.kernel.eps},
          {"sweep", sweep},
          {"spearman", r.spearman},
          {"window", {{"ratio", w.ratio}, {"deviation", w.deviation}, {"margin", w.margin}, {"x2", w.x2},
                      {"classical_hit", w.classical_hit}, {"path", w.path}}},
          {"checks", checks_json(r.checks)}};
}

std::string ensemble_csv(const WeightedEnsemble& e) {
  std::string s = "id,x0,y0,vx0,vy0,xT,yT,vxT,vyT,final_bin,weight,escaped\n";
  for (std::size_t i = 0; i < e.traj.size(); ++i) {
    const ClassicalTrajectory& t = e.traj[i];
    s += std::to_string(i);
    for (double v : {t.x0[0], t.x0[1], t.v0[0], t.v0[1], t.xT[0], t.xT[1], t.vT[0], t.vT[1]}) s += "," + num(v);
    s += "," + std::to_string(t.final_bin) + "," + num(t.weight) + "," + (t.escaped ? "1" : "0") + "\n";
  }
  return s;
}

std::string screen_csv(const std::vector<ScreenRow>& rows) {
  std::string s = "bin,leaf,x,born,weighted\n";
  for (const ScreenRow& r : rows)
    s += std::to_string(r.bin) + "," + std::to_string(r.leaf) + "," + num(r.x) + "," + num(r.born) + "," +
         num(r.weighted) + "\n";
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("cannot write " + path.string());
  os << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ArgumentError(path.string() + ": " + e.what());
  }
}

void write_run(const ScenarioResult& r, const fs::path& dir) {
  fs::create_directories(dir / "reports");
  for (const auto& [k, psi] : r.q.snapshots) {
    char name[32];
    std::snprintf(name, sizeof name, "psi_%05lld.bin", static_cast<long long>(k));
    write_psi(dir / name, psi);
  }
  write_json(dir / "tree.json", tree_json(r.q.tree));
  write_text(dir / "ensemble.csv", ensemble_csv(r.ens));
  write_text(dir / "screen.csv", screen_csv(r.screen));

  const fs::path rep = dir / "reports";
  const BranchTree& t = r.q.tree;
  write_json(rep / "summary.json", {{"name", r.cfg.name},
                                    {"kind", kind_name(r.cfg.kind)},
                                    {"field", r.cfg.field},
                                    {"seed", r.cfg.seed},
                                    {"steps", r.cfg.phys.steps()},
                                    {"records", t.steps()},
                                    {"trajectories", r.ens.traj.size()},
                                    {"escaped", r.ens.escaped},
                                    {"renorm", r.ens.renorm},
                                    {"underfilled", r.ens.underfilled},
                                    {"visibility", r.visibility},
                                    {"screen_error", r.screen_error},
                                    {"coarse_error", r.coarse_error},
                                    {"passed", r.passed()},
                                    {"checks", checks_json(r.checks)}});
  write_json(rep / "branch_born.json", born_json(r.born));
  write_json(rep / "lemma1.json", {{"sibling", r.lemma1.sibling},
                                   {"reentry", r.lemma1.reentry},
                                   {"outside", r.lemma1.outside},
                                   {"outside_unweighted", r.lemma1.outside_unweighted}});
  json sigma = json::array();
  for (const SigmaRow& s : r.sigma) sigma.push_back({{"node", s.node}, {"time", s.time}, {"discrepancy", s.discrepancy}});
  write_json(rep / "sigma.json", sigma);
  json leaves = json::array();
  for (int id : t.leaves())
    leaves.push_back({{"id", id}, {"packet_mass", t.nodes[std::size_t(id)].packet_mass}});
  write_json(rep / "leaves.json", leaves);
  if (!r.equivariance.empty()) write_json(rep / "equivariance.json", {{"distance", r.equivariance}});
}

std::string tree_outline(const json& tree) {
  std::ostringstream os;
  const json& nodes = tree.at("nodes");
  std::function<void(int, int)> walk = [&](int id, int depth) {
    const json& n = nodes.at(std::size_t(id));
    os << std::string(std::size_t(2 * depth), ' ') << "node " << id << "  born t=" << n.at("birth_time").get<double>()
       << "  mass=" << n.at("packet_mass").get<double>() << "  live records " << n.at("birth").get<long long>() << ".."
       << n.at("last").get<long long>() << "\n";
    for (const json& c : n.at("children")) walk(c.get<int>(), depth + 1);
  };
  walk(tree.at("root").get<int>(), 0);
  os << (tree.at("confirmed").get<bool>() ? "confirmed" : "provisional") << ", " << tree.at("leaves").size()
     << " leaves\n";
  return os.str();
}

}  // namespace hct
