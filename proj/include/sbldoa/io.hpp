#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "sbldoa/array_model.hpp"
#include "sbldoa/baselines.hpp"
#include "sbldoa/sbl.hpp"

namespace sbldoa {

// Snapshot file, see docs/formats.md:
//   sbldoa-snapshots 1
//   N <n>
//   L <l>
//   spacing <d/lambda>
//   grid <a1>,<a2>,...
//   <N lines of L comma-separated re,im pairs>
struct SnapshotFile {
  ArrayGeometry geometry;
  AngularGrid grid;
  CMatrix snapshots;
};

std::string format_snapshot_file(const SnapshotFile& file);
SnapshotFile parse_snapshot_file(const std::string& text);
void write_snapshot_file(const std::filesystem::path& path, const SnapshotFile& file);
SnapshotFile read_snapshot_file(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const SblResult& result, const AngularGrid& grid);
nlohmann::ordered_json to_json(const DoaEstimate& estimate);

// angle_deg,power_db with power_db = 10 log10(value), floored at -200 dB.
std::string spectrum_csv(const AngularSpectrum& spectrum, const AngularGrid& grid);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace sbldoa
