#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "memdiff/analog_net.hpp"
#include "memdiff/digital_mlp.hpp"
#include "memdiff/latent.hpp"
#include "memdiff/matrix.hpp"
#include "memdiff/solver.hpp"

namespace memdiff {

using Json = nlohmann::json;

// ---- CSV ----

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

struct PointTable {
  std::vector<Vec> points;
  std::vector<int> labels;  // -1 for unlabeled rows
};

// Columns: sample_id,label,x1..xn (label column empty for unlabeled points).
void write_points_csv(const std::filesystem::path& path, std::span<const Vec> points, std::span<const int> labels = {});
PointTable read_points_csv(const std::filesystem::path& path);

// Columns: lab_time,x1..xn.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
void write_series_csv(const std::filesystem::path& path, const std::string& header, std::span<const double> values);

// ---- images ----

// Binary PGM (P5) of a square image in [-1, 1].
void write_pgm(const std::filesystem::path& path, std::span<const double> image, std::size_t side);
void write_image_csv(const std::filesystem::path& path, std::span<const double> image, std::size_t side);

// ---- SVG ----

struct SvgSeries {
  std::string name;
  std::vector<double> x, y;
};

void write_scatter_svg(const std::filesystem::path& path, const std::string& title, std::span<const Vec> points,
                       std::span<const int> labels = {}, double extent = 2.5);
void write_line_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, std::span<const SvgSeries> series);
void write_heatmap_svg(const std::filesystem::path& path, const std::string& title, const Matrix& values,
                       std::span<const double> row_ticks, std::span<const double> col_ticks,
                       const std::string& row_label, const std::string& col_label);

// ---- model files ----

inline constexpr int kModelFormatVersion = 1;

Json to_json(const DigitalMLP& net);
DigitalMLP digital_mlp_from_json(const Json& j);

Json to_json(const VaeEncoder& enc);
VaeEncoder vae_encoder_from_json(const Json& j);
Json to_json(const VaeDecoder& dec);
VaeDecoder vae_decoder_from_json(const Json& j);

// Deployed network: JSON summary (dims, scales, gains) plus one CSV of
// programmed conductances (mS) per layer, written next to json_path as
// <stem>_layer<i>.csv.
void export_analog(const std::filesystem::path& json_path, const AnalogMLP& net);
AnalogMLP import_analog(const std::filesystem::path& json_path);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace memdiff
