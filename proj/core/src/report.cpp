#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "stegamark/robustness_eval.hpp"

namespace stegamark {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSweepHeader = "kind,level,mean,p10,p50,p90,n";

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string short_num(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

void write_csv(const SweepTable& table, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kSweepHeader << '\n';
  for (const auto& r : table.rows) {
    out << r.kind << ',' << num(r.level) << ',' << num(r.mean) << ',' << num(r.p10) << ',' << num(r.p50) << ','
        << num(r.p90) << ',' << r.n << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Accuracy (y, fixed to [0,1]) against level (x), one polyline per kind.
void write_plot(const SweepTable& table, const fs::path& path) {
  constexpr int kW = 640, kH = 420, kLeft = 60, kRight = 150, kTop = 30, kBottom = 50;
  cv::Mat img(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255));

  std::map<std::string, std::vector<const SweepRow*>> series;
  std::vector<std::string> order;
  double xmin = table.rows.front().level, xmax = xmin;
  for (const auto& r : table.rows) {
    if (!series.count(r.kind)) order.push_back(r.kind);
    series[r.kind].push_back(&r);
    xmin = std::min(xmin, r.level);
    xmax = std::max(xmax, r.level);
  }
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  const int pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto to_px = [&](double x, double y) {
    return cv::Point(kLeft + static_cast<int>((x - xmin) / (xmax - xmin) * pw),
                     kTop + static_cast<int>((1.0 - y) * ph));
  };

  const cv::Scalar axis(40, 40, 40), grid(220, 220, 220);
  for (int i = 0; i <= 4; ++i) {
    const double y = i / 4.0;
    cv::line(img, to_px(xmin, y), to_px(xmax, y), grid, 1);
    cv::putText(img, short_num(y), to_px(xmin, y) + cv::Point(-45, 5), cv::FONT_HERSHEY_SIMPLEX, 0.4, axis, 1);
  }
  for (int i = 0; i <= 4; ++i) {
    const double x = xmin + (xmax - xmin) * i / 4.0;
    cv::putText(img, short_num(x), to_px(x, 0.0) + cv::Point(-10, 20), cv::FONT_HERSHEY_SIMPLEX, 0.4, axis, 1);
  }
  cv::rectangle(img, to_px(xmin, 1.0), to_px(xmax, 0.0), axis, 1);
  cv::putText(img, table.name + ": bit accuracy vs level", cv::Point(kLeft, 20), cv::FONT_HERSHEY_SIMPLEX, 0.5, axis,
              1);

  const cv::Scalar palette[] = {{200, 80, 30}, {30, 120, 220}, {60, 160, 60}, {150, 50, 150}, {20, 20, 180}};
  int idx = 0;
  for (const auto& kind : order) {
    const auto color = palette[idx % 5];
    const auto& rows = series[kind];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto p = to_px(rows[i]->level, rows[i]->mean);
      cv::circle(img, p, 3, color, cv::FILLED);
      if (i > 0) cv::line(img, to_px(rows[i - 1]->level, rows[i - 1]->mean), p, color, 2);
    }
    const cv::Point legend(kW - kRight + 15, kTop + 20 + 20 * idx);
    cv::line(img, legend, legend + cv::Point(20, 0), color, 2);
    cv::putText(img, kind, legend + cv::Point(25, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4, axis, 1);
    ++idx;
  }
  if (!cv::imwrite(path.string(), img)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

std::vector<fs::path> emit_report(const std::vector<SweepTable>& tables, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& t : tables) {
    if (t.rows.empty()) throw std::invalid_argument("cannot report an empty table: " + t.name);
    const auto base = t.name.empty() ? std::string("table") : t.name;
    const auto csv = out_dir / (base + ".csv");
    const auto png = out_dir / (base + ".png");
    write_csv(t, csv);
    write_plot(t, png);
    written.push_back(csv);
    written.push_back(png);
  }
  return written;
}

SweepTable read_sweep_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) throw std::runtime_error("bad sweep CSV header: " + path.string());
  SweepTable table{path.stem().string(), {}};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw std::runtime_error("malformed sweep row in " + path.string());
    auto d = [](const std::string& s) {
      double v = 0.0;
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc{}) throw std::runtime_error("bad number in sweep CSV: " + s);
      return v;
    };
    table.rows.push_back({cells[0], d(cells[1]), d(cells[2]), d(cells[3]), d(cells[4]), d(cells[5]),
                          std::stoll(cells[6])});
  }
  return table;
}

}  // namespace stegamark
