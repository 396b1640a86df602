#include "apd/record_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace apd {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::runtime_error("not a number: '" + std::string(text) + "'");
  return v;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
  }
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

std::string numbered(const char* base, Eigen::Index m) {
  std::string out;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (j) out += ',';
    out += m == 1 ? std::string(base) : std::string(base) + "_" + std::to_string(j + 1);
  }
  return out;
}

void append(std::string& out, const Vector& v) {
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    out += ',';
    out += format_double(v[j]);
  }
}

[[noreturn]] void bad_line(std::size_t line, const std::string& msg) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + msg);
}

}  // namespace

std::string record_csv(const RunRecord& rec) {
  const Eigen::Index m = rec.rows.empty() ? 1 : rec.rows.front().costs.size();
  std::string out = "step,return," + numbered("cost", m) + ",lr," + numbered("lambda", m) + "\n";
  for (const RunRow& row : rec.rows) {
    out += std::to_string(row.step);
    out += ',';
    out += format_double(row.reward);
    append(out, row.costs);
    out += ',';
    out += format_double(row.lr);
    append(out, row.lambda);
    out += '\n';
  }
  return out;
}

RunRecord parse_record_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw std::runtime_error("line 1: missing header");
  const auto header = split(lines[0], ',');
  if (header.size() < 5 || header[0] != "step" || header[1] != "return")
    bad_line(1, "expected header step,return,cost...,lr,lambda...");
  if ((header.size() - 3) % 2 != 0) bad_line(1, "unbalanced cost and lambda columns");
  const auto m = static_cast<Eigen::Index>((header.size() - 3) / 2);
  const std::string expected = "step,return," + numbered("cost", m) + ",lr," + numbered("lambda", m);
  if (lines[0] != expected) bad_line(1, "expected header '" + expected + "'");

  RunRecord rec;
  rec.kind = RecordKind::Stochastic;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != header.size())
      bad_line(i + 1, "expected " + std::to_string(header.size()) + " columns");
    try {
      RunRow row;
      std::size_t step = 0;
      const auto res = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), step);
      if (res.ec != std::errc() || res.ptr != cells[0].data() + cells[0].size())
        throw std::runtime_error("bad step '" + std::string(cells[0]) + "'");
      row.step = step;
      row.reward = parse_double(cells[1]);
      row.costs.resize(m);
      row.lambda.resize(m);
      for (Eigen::Index j = 0; j < m; ++j) row.costs[j] = parse_double(cells[2 + static_cast<std::size_t>(j)]);
      row.lr = parse_double(cells[2 + static_cast<std::size_t>(m)]);
      for (Eigen::Index j = 0; j < m; ++j)
        row.lambda[j] = parse_double(cells[3 + static_cast<std::size_t>(m + j)]);
      rec.rows.push_back(std::move(row));
    } catch (const std::runtime_error& e) {
      bad_line(i + 1, e.what());
    }
  }
  return rec;
}

std::string trace_csv(const RunRecord& rec) {
  if (rec.rows.empty()) return "step\n";
  const Eigen::Index m = rec.rows.front().lambda.size();
  const Eigen::Index n = rec.rows.front().theta.size();
  std::string out = "step," + numbered("lambda", m);
  for (Eigen::Index i = 0; i < n; ++i) out += ",theta_" + std::to_string(i + 1);
  out += '\n';
  auto emit = [&](std::size_t step, const Vector& lambda, const Vector& theta) {
    out += std::to_string(step);
    append(out, lambda);
    append(out, theta);
    out += '\n';
  };
  for (const RunRow& row : rec.rows) emit(row.step, row.lambda, row.theta);
  emit(rec.rows.size(), rec.final_lambda, rec.final_theta);
  return out;
}

void attach_trace(RunRecord& rec, std::string_view trace_text, const Vector& thresholds) {
  const auto lines = lines_of(trace_text);
  if (lines.size() != rec.rows.size() + 2)
    throw std::runtime_error("trace has " + std::to_string(lines.empty() ? 0 : lines.size() - 1) +
                             " rows, expected " + std::to_string(rec.rows.size() + 1));
  const Eigen::Index m = thresholds.size();
  const auto width = split(lines[0], ',').size();
  if (width < 1 + static_cast<std::size_t>(m)) bad_line(1, "too few columns");
  const auto n = static_cast<Eigen::Index>(width - 1 - static_cast<std::size_t>(m));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != width) bad_line(i + 1, "expected " + std::to_string(width) + " columns");
    Vector lambda(m), theta(n);
    try {
      for (Eigen::Index j = 0; j < m; ++j) lambda[j] = parse_double(cells[1 + static_cast<std::size_t>(j)]);
      for (Eigen::Index j = 0; j < n; ++j)
        theta[j] = parse_double(cells[1 + static_cast<std::size_t>(m + j)]);
    } catch (const std::runtime_error& e) {
      bad_line(i + 1, e.what());
    }
    const std::size_t k = i - 1;
    if (k < rec.rows.size()) {
      if (lambda != rec.rows[k].lambda) bad_line(i + 1, "multiplier disagrees with the record");
      rec.rows[k].theta = theta;
      rec.rows[k].g = rec.rows[k].costs - thresholds;
    } else {
      rec.final_lambda = lambda;
      rec.final_theta = theta;
    }
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace apd
