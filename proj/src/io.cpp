#include "memdiff/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "memdiff/config.hpp"
#include "memdiff/data.hpp"

namespace memdiff {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() && s.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  auto out = open_out(path);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Vec> rows;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    line = strip_cr(line);
    if (line.empty()) continue;
    Vec row;
    for (const auto& cell : split(line)) row.push_back(parse_double(cell, path, ln));
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(path.string() + ":" + std::to_string(ln) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  return m;
}

void write_points_csv(const std::filesystem::path& path, std::span<const Vec> points, std::span<const int> labels) {
  if (!labels.empty()) require_dim(labels.size(), points.size(), "write_points_csv labels");
  auto out = open_out(path);
  const std::size_t n = points.empty() ? 0 : points.front().size();
  out << "sample_id,label";
  for (std::size_t i = 0; i < n; ++i) out << ",x" << (i + 1);
  out << '\n';
  for (std::size_t s = 0; s < points.size(); ++s) {
    out << s << ',';
    if (!labels.empty() && labels[s] >= 0) out << labels[s];
    for (double v : points[s]) out << ',' << v;
    out << '\n';
  }
}

PointTable read_points_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  const auto header = split(strip_cr(line));
  if (header.size() < 3 || header[0] != "sample_id" || header[1] != "label")
    throw FormatError(path.string() + ": expected header sample_id,label,x1,...");
  const std::size_t n = header.size() - 2;
  PointTable t;
  std::size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != n + 2) throw FormatError(path.string() + ":" + std::to_string(ln) + ": wrong column count");
    t.labels.push_back(cells[1].empty() ? -1 : static_cast<int>(parse_double(cells[1], path, ln)));
    Vec p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = parse_double(cells[i + 2], path, ln);
    t.points.push_back(std::move(p));
  }
  return t;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  auto out = open_out(path);
  const std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
  out << "lab_time";
  for (std::size_t i = 0; i < n; ++i) out << ",x" << (i + 1);
  out << '\n';
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    out << traj.times[k];
    for (double v : traj.states[k]) out << ',' << v;
    out << '\n';
  }
}

void write_series_csv(const std::filesystem::path& path, const std::string& header, std::span<const double> values) {
  auto out = open_out(path);
  out << "index," << header << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) out << i << ',' << values[i] << '\n';
}

void write_pgm(const std::filesystem::path& path, std::span<const double> image, std::size_t side) {
  require_dim(image.size(), side * side, "write_pgm");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << side << ' ' << side << "\n255\n";
  for (double v : image) {
    const double g = std::clamp((v + 1.0) * 127.5, 0.0, 255.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(g))));
  }
}

void write_image_csv(const std::filesystem::path& path, std::span<const double> image, std::size_t side) {
  require_dim(image.size(), side * side, "write_image_csv");
  Matrix m(side, side);
  std::copy(image.begin(), image.end(), m.data().begin());
  write_matrix_csv(path, m);
}

// ---- SVG ----

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string svg_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      default: o += c;
    }
  }
  return o;
}

std::ofstream open_svg(const std::filesystem::path& path, int w, int h, const std::string& title) {
  auto out = open_out(path);
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << svg_escape(title) << "</text>\n";
  return out;
}

}  // namespace

void write_scatter_svg(const std::filesystem::path& path, const std::string& title, std::span<const Vec> points,
                       std::span<const int> labels, double extent) {
  const int size = 480, margin = 40;
  auto out = open_svg(path, size, size, title);
  const double plot = size - 2 * margin;
  auto px = [&](double v) { return margin + (v + extent) / (2 * extent) * plot; };
  auto py = [&](double v) { return size - margin - (v + extent) / (2 * extent) * plot; };
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot << "\" height=\"" << plot
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  out << "<line x1=\"" << px(0) << "\" y1=\"" << py(-extent) << "\" x2=\"" << px(0) << "\" y2=\"" << py(extent)
      << "\" stroke=\"#ddd\"/>\n<line x1=\"" << px(-extent) << "\" y1=\"" << py(0) << "\" x2=\"" << px(extent)
      << "\" y2=\"" << py(0) << "\" stroke=\"#ddd\"/>\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() < 2) continue;
    const int lab = labels.empty() ? 0 : std::max(0, labels[i]);
    const double x = std::clamp(points[i][0], -extent, extent), y = std::clamp(points[i][1], -extent, extent);
    out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"1.6\" fill=\"" << kPalette[lab % 6]
        << "\" fill-opacity=\"0.6\"/>\n";
  }
  out << "</svg>\n";
}

void write_line_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, std::span<const SvgSeries> series) {
  const int w = 560, h = 400, margin = 50;
  auto out = open_svg(path, w, h, title);
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  auto px = [&](double v) { return margin + (v - x0) / (x1 - x0) * (w - 2 * margin); };
  auto py = [&](double v) { return h - margin - (v - y0) / (y1 - y0) * (h - 2 * margin); };
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << w - 2 * margin << "\" height=\""
      << h - 2 * margin << "\" fill=\"none\" stroke=\"#888\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << svg_escape(x_label) << " [" << x0 << ", " << x1 << "]</text>\n";
  out << "<text x=\"12\" y=\"" << h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << h / 2 << ")\">"
      << svg_escape(y_label) << " [" << y0 << ", " << y1 << "]</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    out << "<polyline fill=\"none\" stroke=\"" << kPalette[k % 6] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    out << "\"/>\n<text x=\"" << w - margin - 100 << "\" y=\"" << margin + 16 * (k + 1) << "\" font-size=\"12\" fill=\""
        << kPalette[k % 6] << "\">" << svg_escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
}

void write_heatmap_svg(const std::filesystem::path& path, const std::string& title, const Matrix& values,
                       std::span<const double> row_ticks, std::span<const double> col_ticks,
                       const std::string& row_label, const std::string& col_label) {
  const int cell = 48, margin = 90;
  const int w = margin + cell * static_cast<int>(values.cols()) + 20;
  const int h = margin + cell * static_cast<int>(values.rows()) + 30;
  auto out = open_svg(path, w, h, title);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values.data())
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) hi = lo + 1.0;
  for (std::size_t r = 0; r < values.rows(); ++r)
    for (std::size_t c = 0; c < values.cols(); ++c) {
      const double v = values(r, c);
      const double f = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
      const int red = static_cast<int>(255 * f), blue = static_cast<int>(255 * (1 - f));
      const int x = margin + static_cast<int>(c) * cell, y = margin + static_cast<int>(r) * cell;
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
          << (std::isfinite(v) ? "rgb(" + std::to_string(red) + ",80," + std::to_string(blue) + ")" : "#ccc")
          << "\"/>\n<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
          << "\" text-anchor=\"middle\" font-size=\"10\" fill=\"white\">" << v << "</text>\n";
    }
  for (std::size_t r = 0; r < row_ticks.size() && r < values.rows(); ++r)
    out << "<text x=\"" << margin - 6 << "\" y=\"" << margin + static_cast<int>(r) * cell + cell / 2 + 4
        << "\" text-anchor=\"end\" font-size=\"10\">" << row_ticks[r] << "</text>\n";
  for (std::size_t c = 0; c < col_ticks.size() && c < values.cols(); ++c)
    out << "<text x=\"" << margin + static_cast<int>(c) * cell + cell / 2 << "\" y=\"" << margin - 6
        << "\" text-anchor=\"middle\" font-size=\"10\">" << col_ticks[c] << "</text>\n";
  out << "<text x=\"10\" y=\"" << margin - 30 << "\" font-size=\"11\">rows: " << svg_escape(row_label)
      << ", cols: " << svg_escape(col_label) << "</text>\n</svg>\n";
}

// ---- model files ----

namespace {

Json matrix_json(const Matrix& m) { return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

Matrix matrix_from(const Json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto d = j.at("data").get<Vec>();
  require_dim(d.size(), m.size(), "matrix json");
  std::copy(d.begin(), d.end(), m.data().begin());
  return m;
}

Json kernel_json(const Kernel& k) { return Json{{"a", k.a}, {"b", k.b}, {"size", k.size}, {"data", k.data}}; }

Kernel kernel_from(const Json& j) {
  Kernel k(j.at("a").get<std::size_t>(), j.at("b").get<std::size_t>(), j.at("size").get<std::size_t>());
  const auto d = j.at("data").get<Vec>();
  require_dim(d.size(), k.data.size(), "kernel json");
  k.data = d;
  return k;
}

void check_version(const Json& j, const char* kind) {
  if (j.value("format_version", 0) != kModelFormatVersion || j.value("kind", std::string()) != kind)
    throw FormatError(std::string("expected a version ") + std::to_string(kModelFormatVersion) + " '" + kind +
                      "' model file");
}

}  // namespace

Json to_json(const DigitalMLP& net) {
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = "score_mlp";
  j["widths"] = net.widths();
  j["time_frequencies"] = net.time_embedding().frequencies();
  if (net.condition_embedding()) j["condition_projection"] = matrix_json(net.condition_embedding()->projection());
  j["clamp"] = {{"lo", net.clamp().lo}, {"hi", net.clamp().hi}};
  j["output_scaling"] = net.scaling() == OutputScaling::kInvSigma ? "inv_sigma" : "none";
  j["schedule"] = net.schedule();
  j["params"] = net.params();
  return j;
}

DigitalMLP digital_mlp_from_json(const Json& j) {
  check_version(j, "score_mlp");
  std::optional<ConditionEmbedding> ce;
  if (j.contains("condition_projection")) ce = ConditionEmbedding(matrix_from(j.at("condition_projection")));
  const std::string sc = j.at("output_scaling").get<std::string>();
  DigitalMLP net(j.at("widths").get<std::vector<std::size_t>>(), TimeEmbedding(j.at("time_frequencies").get<Vec>()),
                 std::move(ce), ClampRange{j.at("clamp").at("lo").get<double>(), j.at("clamp").at("hi").get<double>()},
                 sc == "inv_sigma" ? OutputScaling::kInvSigma : OutputScaling::kNone, j.at("schedule").get<VPSchedule>());
  const auto p = j.at("params").get<Vec>();
  require_dim(p.size(), net.param_count(), "score_mlp params");
  net.params() = p;
  return net;
}

namespace {

Json shape_json(const VaeShape& s) {
  return Json{{"image", s.image}, {"latent", s.latent}, {"seed_channels", s.seed_channels},
              {"seed_size", s.seed_size}, {"mid_channels", s.mid_channels}, {"k1", s.k1}, {"s1", s.s1},
              {"p1", s.p1}, {"k2", s.k2}, {"s2", s.s2}, {"p2", s.p2}};
}

VaeShape shape_from(const Json& j) {
  VaeShape s;
  s.image = j.at("image");
  s.latent = j.at("latent");
  s.seed_channels = j.at("seed_channels");
  s.seed_size = j.at("seed_size");
  s.mid_channels = j.at("mid_channels");
  s.k1 = j.at("k1");
  s.s1 = j.at("s1");
  s.p1 = j.at("p1");
  s.k2 = j.at("k2");
  s.s2 = j.at("s2");
  s.p2 = j.at("p2");
  return s;
}

}  // namespace

Json to_json(const VaeEncoder& enc) {
  return Json{{"format_version", kModelFormatVersion},
              {"kind", "vae_encoder"},
              {"shape", shape_json(enc.shape())},
              {"conv1", kernel_json(enc.conv1)},
              {"conv2", kernel_json(enc.conv2)},
              {"b1", enc.b1},
              {"b2", enc.b2},
              {"lin_w", matrix_json(enc.lin_w)},
              {"lin_b", enc.lin_b}};
}

VaeEncoder vae_encoder_from_json(const Json& j) {
  check_version(j, "vae_encoder");
  VaeEncoder e(shape_from(j.at("shape")));
  e.conv1 = kernel_from(j.at("conv1"));
  e.conv2 = kernel_from(j.at("conv2"));
  e.b1 = j.at("b1").get<Vec>();
  e.b2 = j.at("b2").get<Vec>();
  e.lin_w = matrix_from(j.at("lin_w"));
  e.lin_b = j.at("lin_b").get<Vec>();
  return e;
}

Json to_json(const VaeDecoder& dec) {
  return Json{{"format_version", kModelFormatVersion},
              {"kind", "vae_decoder"},
              {"shape", shape_json(dec.shape())},
              {"clamp", {{"lo", dec.clamp().lo}, {"hi", dec.clamp().hi}}},
              {"lin_w", matrix_json(dec.lin_w)},
              {"lin_b", dec.lin_b},
              {"dc1", kernel_json(dec.dc1)},
              {"dc2", kernel_json(dec.dc2)},
              {"b1", dec.b1},
              {"b2", dec.b2}};
}

VaeDecoder vae_decoder_from_json(const Json& j) {
  check_version(j, "vae_decoder");
  VaeDecoder d(shape_from(j.at("shape")),
               ClampRange{j.at("clamp").at("lo").get<double>(), j.at("clamp").at("hi").get<double>()});
  d.lin_w = matrix_from(j.at("lin_w"));
  d.lin_b = j.at("lin_b").get<Vec>();
  d.dc1 = kernel_from(j.at("dc1"));
  d.dc2 = kernel_from(j.at("dc2"));
  d.b1 = j.at("b1").get<Vec>();
  d.b2 = j.at("b2").get<Vec>();
  return d;
}

void export_analog(const std::filesystem::path& json_path, const AnalogMLP& net) {
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = "analog_mlp";
  j["unit_volt"] = net.unit_volt;
  j["clamp"] = net.clamp;
  j["time_frequencies"] = net.time_embedding.frequencies();
  if (net.condition_embedding) j["condition_projection"] = matrix_json(net.condition_embedding->projection());
  j["output_scaling"] = net.scaling == OutputScaling::kInvSigma ? "inv_sigma" : "none";
  j["schedule"] = net.schedule;
  Json layers = Json::array();
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const AnalogLayer& layer = net.layers[l];
    const std::string csv = json_path.stem().string() + "_layer" + std::to_string(l) + ".csv";
    write_matrix_csv(json_path.parent_path() / csv, layer.xbar.g_programmed);
    layers.push_back({{"rows", layer.xbar.rows},
                      {"cols", layer.xbar.cols},
                      {"in_dim", layer.in_dim()},
                      {"out_dim", layer.out_dim()},
                      {"scale_mS_per_unit", layer.scale},
                      {"gain_V_per_mA", layer.gain},
                      {"activation", layer.activation == Activation::kRelu ? "relu" : "identity"},
                      {"has_bias_row", layer.has_bias_row},
                      {"bias_volt", layer.bias_volt},
                      {"device", layer.xbar.config},
                      {"conductance_csv", csv}});
  }
  j["layers"] = layers;
  write_json_file(json_path, j);
}

AnalogMLP import_analog(const std::filesystem::path& json_path) {
  const Json j = read_json_file(json_path);
  check_version(j, "analog_mlp");
  AnalogMLP net;
  net.unit_volt = j.at("unit_volt");
  net.clamp = j.at("clamp").get<ClampConfig>();
  net.time_embedding = TimeEmbedding(j.at("time_frequencies").get<Vec>());
  if (j.contains("condition_projection"))
    net.condition_embedding = ConditionEmbedding(matrix_from(j.at("condition_projection")));
  net.scaling = j.at("output_scaling").get<std::string>() == "inv_sigma" ? OutputScaling::kInvSigma : OutputScaling::kNone;
  net.schedule = j.at("schedule").get<VPSchedule>();
  for (const Json& lj : j.at("layers")) {
    AnalogLayer layer;
    const Matrix g = read_matrix_csv(json_path.parent_path() / lj.at("conductance_csv").get<std::string>());
    require_dim(g.rows(), lj.at("rows").get<std::size_t>(), "analog import rows");
    require_dim(g.cols(), lj.at("cols").get<std::size_t>(), "analog import cols");
    layer.xbar = crossbar_from_conductances(g, lj.at("device").get<DeviceConfig>());
    layer.scale = lj.at("scale_mS_per_unit");
    layer.gain = lj.at("gain_V_per_mA");
    layer.activation = lj.at("activation").get<std::string>() == "relu" ? Activation::kRelu : Activation::kIdentity;
    layer.has_bias_row = lj.at("has_bias_row");
    layer.bias_volt = lj.at("bias_volt");
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Json read_json_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace memdiff
