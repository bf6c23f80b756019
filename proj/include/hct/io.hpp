#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hct/scenarios.hpp"

namespace hct {

using json = nlohmann::ordered_json;

// Binary wave function: magic, dim, n[2], lo[2], hi[2], time, then re/im pairs.
void write_psi(const std::filesystem::path& path, const WaveFunction& psi);
WaveFunction read_psi(const std::filesystem::path& path);

json checks_json(const std::vector<Check>& checks);
json tree_json(const BranchTree& tree);
json born_json(const std::vector<BornRow>& rows);
json chains_json(const std::vector<ChainRow>& rows);
json ia_json(const IAReport& r);
json lattice_json(const LatticeReport& r);

std::string ensemble_csv(const WeightedEnsemble& e);
std::string screen_csv(const std::vector<ScreenRow>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

// psi_*.bin, tree.json, ensemble.csv, screen.csv and reports/ for one scenario run.
void write_run(const ScenarioResult& r, const std::filesystem::path& dir);

// Indented outline of a tree.json document.
std::string tree_outline(const json& tree);

}  // namespace hct
