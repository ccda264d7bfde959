#include "riskloss/cli/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "riskloss/format.hpp"

namespace riskloss::cli {
namespace {

struct Column {
  std::string name;
  bool extreme;
  std::optional<double> (*get)(const ErrorStats&);
  bool higher_is_better;
};

const std::vector<Column>& columns() {
  static const std::vector<Column> cols = [] {
    std::vector<Column> out;
    for (const bool extreme : {false, true}) {
      out.push_back({"mse", extreme, [](const ErrorStats& s) -> std::optional<double> { return s.mse; }, false});
      out.push_back({"mae", extreme, [](const ErrorStats& s) -> std::optional<double> { return s.mae; }, false});
      out.push_back({"r2", extreme, [](const ErrorStats& s) { return s.r2; }, true});
      out.push_back({"max_ae", extreme, [](const ErrorStats& s) -> std::optional<double> { return s.max_ae; }, false});
      out.push_back({"min_ae", extreme, [](const ErrorStats& s) -> std::optional<double> { return s.min_ae; }, false});
    }
    return out;
  }();
  return cols;
}

std::optional<double> cell(const ReportRow& row, const Column& col) {
  if (!col.extreme) {
    return col.get(row.metrics.overall);
  }
  if (!row.metrics.extreme) {
    return std::nullopt;
  }
  return col.get(*row.metrics.extreme);
}

std::vector<std::vector<Mark>> all_marks(std::span<const ReportRow> rows) {
  std::vector<std::vector<Mark>> out;
  for (const auto& col : columns()) {
    std::vector<std::optional<double>> values;
    for (const auto& row : rows) values.push_back(cell(row, col));
    out.push_back(column_marks(values, col.higher_is_better));
  }
  return out;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

bool is_mse(const ReportRow& row) { return row.loss == "mse"; }

}  // namespace

std::vector<Mark> column_marks(std::span<const std::optional<double>> values,
                               bool higher_is_better) {
  std::vector<Mark> marks(values.size(), Mark::None);
  std::vector<double> present;
  for (const auto& v : values) {
    if (v) present.push_back(*v);
  }
  if (values.size() < 2 || present.empty()) {
    return marks;
  }
  std::sort(present.begin(), present.end());
  if (higher_is_better) {
    std::reverse(present.begin(), present.end());
  }
  const double best = present.front();
  const auto next = std::find_if(present.begin(), present.end(),
                                 [&](double v) { return v != best; });
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) continue;
    if (*values[i] == best) {
      marks[i] = Mark::Best;
    } else if (next != present.end() && *values[i] == *next) {
      marks[i] = Mark::RunnerUp;
    }
  }
  return marks;
}

std::string report_text(std::span<const ReportRow> rows) {
  const auto marks = all_marks(rows);
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> group{"", "", "", ""};
  std::vector<std::string> header{"run", "loss", "alpha", "lambda"};
  for (const auto& col : columns()) {
    group.push_back(col.name == "mse" ? (col.extreme ? "extreme" : "overall") : "");
    header.push_back(col.name);
  }
  table.push_back(group);
  table.push_back(header);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    std::vector<std::string> line{row.run, row.loss, is_mse(row) ? "-" : fixed4(row.alpha),
                                  is_mse(row) ? "-" : fixed4(row.lambda)};
    for (std::size_t c = 0; c < columns().size(); ++c) {
      const auto v = cell(row, columns()[c]);
      std::string text = v ? fixed4(*v) : "-";
      if (marks[c][r] == Mark::Best) text = "**" + text + "**";
      if (marks[c][r] == Mark::RunnerUp) text = "_" + text + "_";
      line.push_back(text);
    }
    table.push_back(line);
  }

  std::vector<std::size_t> width(table.front().size(), 0);
  for (const auto& line : table) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream out;
  for (const auto& line : table) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c == 4 || c == 4 + columns().size() / 2) text += "| ";
      text += line[c];
      text.append(width[c] - line[c].size() + 2, ' ');
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out << text << '\n';
  }
  if (rows.size() > 1) {
    out << "best: **v**  runner-up: _v_  (r2 higher is better, other columns lower)\n";
  }
  return out.str();
}

std::string report_csv(std::span<const ReportRow> rows) {
  const auto marks = all_marks(rows);
  std::vector<std::string> header{"run", "loss", "alpha", "lambda"};
  for (const auto& col : columns()) {
    const std::string name = (col.extreme ? "extreme_" : "") + col.name;
    header.push_back(name);
    header.push_back(name + "_mark");
  }
  std::ostringstream out;
  out << join_csv(header) << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    std::vector<std::string> line{row.run, row.loss, is_mse(row) ? "" : format_real(row.alpha),
                                  is_mse(row) ? "" : format_real(row.lambda)};
    for (std::size_t c = 0; c < columns().size(); ++c) {
      const auto v = cell(row, columns()[c]);
      line.push_back(v ? format_real(*v) : "");
      line.push_back(marks[c][r] == Mark::Best       ? "best"
                     : marks[c][r] == Mark::RunnerUp ? "second"
                                                     : "");
    }
    out << join_csv(line) << '\n';
  }
  return out.str();
}

}  // namespace riskloss::cli
