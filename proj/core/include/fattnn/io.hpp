#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fattnn/factor_model.hpp"
#include "fattnn/harness.hpp"
#include "fattnn/tcn.hpp"

namespace fattnn {

using Bytes = std::vector<std::uint8_t>;

// All integers and floats are little-endian. f64 is IEEE-754 binary64.
//
// Series file:
//   "FATT" | u32 dtype (1 = f64) | u32 version (1)
//   | u32 K | u64 dims[K] | u32 q | u64 response_dims[q] | u64 n
//   | f64 covariates[n * prod dims] | f64 responses[n * prod response_dims]
// Slices are time-major, each in last-index-fastest order. q = 0 means the
// file carries covariates only. The dtype word comes first so a byte-swapped
// file is recognised (IoErrc::foreign_endian) before any other field is
// trusted. Reading checks magic, dtype, version, dims and payload length in
// that order.
inline constexpr std::uint32_t kSeriesVersion = 1;
inline constexpr std::uint32_t kDtypeF64 = 1;

Bytes encode_series(const SeriesPair& data);
SeriesPair decode_series(std::span<const std::uint8_t> bytes);
void write_series(const std::filesystem::path& path, const SeriesPair& data);
SeriesPair read_series(const std::filesystem::path& path);

// Checkpoint:
//   "FTCN" | u32 dtype (1) | u32 version (1)
//   | u64 input_width | u64 output_width | u32 B | u64 channels[B]
//   | u64 kernel_size | u64 dilations[B] | u32 activation (0 relu, 1 linear)
//   | f64 dropout | f64 learning_rate | u64 epochs | u64 batch_length
//   | u64 patience | f64 validation_fraction | u64 seed
//   | u8 lagged_response | u8 standardize | u64 min_history
//   | u32 q | u64 response_shape[q]
//   | u64 P | f64 weights[P]
//   | f64 input_mean[input_width] | f64 input_scale[input_width]
//   | f64 output_mean[output_width] | f64 output_scale[output_width]
Bytes encode_checkpoint(const TcnModel& model);
TcnModel decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const TcnModel& model);
TcnModel load_checkpoint(const std::filesystem::path& path);

// Loadings: "FATL" | u32 dtype | u32 version | u32 K | K x (u64 d | u64 r | f64[d*r] row-major)
Bytes encode_loadings(const LoadingSet& loadings);
LoadingSet decode_loadings(std::span<const std::uint8_t> bytes);
void save_loadings(const std::filesystem::path& path, const LoadingSet& loadings);
LoadingSet load_loadings(const std::filesystem::path& path);

Bytes read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// `key = value` lines: run summary first, then `config.<key>` entries.
void write_report(std::ostream& out, const ExperimentReport& report);
std::string report_text(const ExperimentReport& report);
/// Parses `key = value` lines, skipping blanks and `#` comments.
std::vector<std::pair<std::string, std::string>> parse_report(std::string_view text);

/// Long-format CSV with header `step,entry,observed,predicted`; step counts
/// from the first test point, entry is the flat response index.
void write_predictions_csv(std::ostream& out, const ExperimentReport& report);

}  // namespace fattnn
