#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapsr/error.hpp"
#include "lapsr/imaging/image.hpp"
#include "lapsr/metrics/metrics.hpp"

namespace lapsr {

struct EvalRow {
  std::string path;
  std::uint32_t scale = 0;
  double psnr = 0, ssim = 0, ifc = 0;
  std::string error;  // non-empty when the row failed

  bool ok() const { return error.empty(); }
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::size_t shave = 0;
  double mean_psnr = 0, mean_ssim = 0, mean_ifc = 0;
  std::size_t failures = 0;
};

// One ground-truth / super-resolved pair; `sr` empty when producing it failed.
struct EvalPair {
  std::string path;
  Image reference;
  std::optional<Image> sr;
  std::string error;
};

struct MetricConfig {
  SsimConfig ssim;
  IfcConfig ifc;
};

// Scores every pair on luminance after shaving `shave` border pixels. Failed
// pairs become error rows; means run over the successful rows in input order.
inline EvalReport evaluate_corpus(const std::vector<EvalPair>& pairs, std::uint32_t scale, std::size_t shave,
                                  const MetricConfig& metrics = {}) {
  EvalReport report;
  report.shave = shave;
  std::size_t ok = 0;
  for (const auto& pair : pairs) {
    EvalRow row{pair.path, scale, 0, 0, 0, {}};
    try {
      if (!pair.sr) throw Error(pair.error.empty() ? "missing super-resolved image" : pair.error);
      if (!pair.sr->same_dims(pair.reference))
        throw ShapeError("dimension mismatch: reference " + std::to_string(pair.reference.width) + "x" +
                         std::to_string(pair.reference.height) + " vs output " + std::to_string(pair.sr->width) + "x" +
                         std::to_string(pair.sr->height));
      const ImagePlane ref = rgb_to_luminance(pair.reference).shaved(shave);
      const ImagePlane test = rgb_to_luminance(*pair.sr).shaved(shave);
      row.psnr = psnr(ref, test);
      row.ssim = ssim(ref, test, metrics.ssim);
      row.ifc = ifc(ref, test, metrics.ifc);
      report.mean_psnr += row.psnr;
      report.mean_ssim += row.ssim;
      report.mean_ifc += row.ifc;
      ++ok;
    } catch (const Error& e) {
      row.error = e.what();
      row.psnr = row.ssim = row.ifc = std::nan("");
      ++report.failures;
    }
    report.rows.push_back(std::move(row));
  }
  if (ok > 0) {
    report.mean_psnr /= static_cast<double>(ok);
    report.mean_ssim /= static_cast<double>(ok);
    report.mean_ifc /= static_cast<double>(ok);
  } else {
    report.mean_psnr = report.mean_ssim = report.mean_ifc = std::nan("");
  }
  return report;
}

// Shortest round-trip decimal; "inf" / "nan" for non-finite values.
inline std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "path,scale,psnr,ssim,ifc\n";
  for (const auto& row : r.rows)
    os << row.path << ',' << row.scale << ',' << format_metric(row.psnr) << ',' << format_metric(row.ssim) << ','
       << format_metric(row.ifc) << '\n';
  return os.str();
}

inline nlohmann::json report_json(const EvalReport& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return format_metric(v);
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json j{{"path", row.path}, {"scale", row.scale}, {"psnr", num(row.psnr)}, {"ssim", num(row.ssim)},
                     {"ifc", num(row.ifc)}};
    if (!row.ok()) j["error"] = row.error;
    rows.push_back(std::move(j));
  }
  return {{"count", r.rows.size()},
          {"failures", r.failures},
          {"shave", r.shave},
          {"mean", {{"psnr", num(r.mean_psnr)}, {"ssim", num(r.mean_ssim)}, {"ifc", num(r.mean_ifc)}}},
          {"rows", rows}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline void write_report(const EvalReport& r, const std::filesystem::path& csv, const std::filesystem::path& json) {
  write_text(csv, report_csv(r));
  write_text(json, report_json(r).dump(2) + "\n");
}

}  // namespace lapsr
