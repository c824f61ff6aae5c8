#pragma once

#include "streamid/pipeline.hpp"
#include "streamid/stream_io.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace streamid {

using StreamOpener = std::function<std::unique_ptr<ColumnSource>(const std::filesystem::path&)>;

std::unique_ptr<ColumnSource> open_file_source(const std::filesystem::path& path);

/// One forward pass over `input`; writes the model to `output` and returns it.
IDModel cmd_compress(const std::filesystem::path& input, const std::filesystem::path& output,
                     const CompressorConfig& config, const StreamOpener& opener = open_file_source);

/// Writes basis * coeffs(:, first:last) to a DMS1 file. Empty range means all columns.
void cmd_reconstruct(const std::filesystem::path& model, const std::filesystem::path& output,
                     std::optional<Index> first = std::nullopt, std::optional<Index> last = std::nullopt);

/// True error from one streaming pass over the original next to the stored estimate.
nlohmann::json cmd_eval(const std::filesystem::path& model, const std::filesystem::path& original);

struct BenchConfig {
  std::vector<std::string> methods;
  std::vector<Index> ranks;
  CompressorConfig base;  // k and t are overridden per rank
  std::uint64_t budget = kDefaultOracleBudget;
};

struct BenchRow {
  std::string method;
  Index k = 0;
  double true_rel = 0.0;
  std::optional<double> est_rel;
  std::optional<double> grad_rel;  // when a grid matching m is configured
  std::vector<int> chosen;
  double wall_ms = 0.0;
  std::string error;  // non-empty when the method failed
};

const std::vector<std::string>& bench_methods();

std::vector<BenchRow> cmd_bench(const Matrix& a, const BenchConfig& config);
std::vector<BenchRow> cmd_bench(const std::filesystem::path& input, const BenchConfig& config);
nlohmann::json bench_to_json(const std::vector<BenchRow>& rows);
std::string bench_to_csv(const std::vector<BenchRow>& rows);

/// Maps an exception to the documented process exit code.
int exit_code_for(const std::exception& e);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace streamid
