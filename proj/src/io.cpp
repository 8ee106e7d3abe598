#include "sbldoa/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "sbldoa/config.hpp"
#include "sbldoa/errors.hpp"

namespace sbldoa {

namespace {

constexpr std::string_view kMagic = "sbldoa-snapshots 1";

std::string expect_field(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("snapshot file ends before '" + name + "'");
  const auto space = line.find(' ');
  if (space == std::string::npos || line.substr(0, space) != name)
    throw DomainError("snapshot file: expected '" + name + "' line, got '" + line + "'");
  return line.substr(space + 1);
}

}  // namespace

std::string format_snapshot_file(const SnapshotFile& file) {
  const CMatrix& y = file.snapshots;
  if (y.rows() != file.geometry.n_sensors)
    throw DomainError("snapshot rows do not match the number of sensors");
  std::string out(kMagic);
  out += fmt::format("\nN {}\nL {}\nspacing {}\ngrid ", y.rows(), y.cols(),
                     file.geometry.spacing_wavelengths);
  for (std::size_t i = 0; i < file.grid.size(); ++i)
    out += fmt::format("{}{}", i ? "," : "", file.grid[i]);
  out += '\n';
  for (Eigen::Index n = 0; n < y.rows(); ++n) {
    for (Eigen::Index l = 0; l < y.cols(); ++l)
      out += fmt::format("{}{},{}", l ? "," : "", y(n, l).real(), y(n, l).imag());
    out += '\n';
  }
  return out;
}

SnapshotFile parse_snapshot_file(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw DomainError("not a snapshot file (missing '" + std::string(kMagic) + "' header)");
  const int n = std::stoi(expect_field(in, "N"));
  const int l = std::stoi(expect_field(in, "L"));
  const double spacing = std::stod(expect_field(in, "spacing"));
  AngularGrid grid = parse_grid(expect_field(in, "grid"));
  if (n < 2 || l < 1) throw DomainError("snapshot file has invalid dimensions");

  SnapshotFile file{ArrayGeometry{n, spacing}, std::move(grid), CMatrix(n, l)};
  file.geometry.validate();
  for (int row = 0; row < n; ++row) {
    if (!std::getline(in, line)) throw DomainError("snapshot file is missing sensor rows");
    const auto values = split_list(line);
    if (values.size() != static_cast<std::size_t>(2 * l))
      throw DomainError("snapshot row " + std::to_string(row + 1) + " must hold " +
                        std::to_string(2 * l) + " numbers");
    for (int col = 0; col < l; ++col)
      file.snapshots(row, col) = cdouble(std::stod(values[2 * static_cast<std::size_t>(col)]),
                                         std::stod(values[2 * static_cast<std::size_t>(col) + 1]));
  }
  return file;
}

void write_snapshot_file(const std::filesystem::path& path, const SnapshotFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << format_snapshot_file(file);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

SnapshotFile read_snapshot_file(const std::filesystem::path& path) {
  return parse_snapshot_file(read_text_file(path));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::ordered_json to_json(const SblResult& result, const AngularGrid& grid) {
  nlohmann::ordered_json j;
  std::vector<double> angles;
  for (std::size_t idx : result.active_set) angles.push_back(grid[idx]);
  j["active_set"] = {{"indices", result.active_set}, {"angles_deg", angles}};
  j["gamma"] = std::vector<double>(result.gamma.data(), result.gamma.data() + result.gamma.size());
  j["sigma2"] = result.sigma2;
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["covariance_loaded"] = result.covariance_loaded;
  j["epsilon_trace"] = result.epsilon_trace;
  j["evidence_trace"] = result.evidence_trace;
  return j;
}

nlohmann::ordered_json to_json(const DoaEstimate& estimate) {
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(estimate.method));
  j["indices"] = estimate.indices;
  j["angles_deg"] = estimate.angles_deg;
  j["source_powers"] = estimate.source_powers;
  return j;
}

std::string spectrum_csv(const AngularSpectrum& spectrum, const AngularGrid& grid) {
  if (spectrum.values.size() != grid.size())
    throw DomainError("spectrum length does not match the grid");
  std::string out = "angle_deg,power_db\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = spectrum.values[i];
    const double db = v > 0.0 ? std::max(10.0 * std::log10(v), -200.0) : -200.0;
    out += fmt::format("{},{}\n", grid[i], db);
  }
  return out;
}

}  // namespace sbldoa
