#ifndef OPRISK_IO_HPP
#define OPRISK_IO_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "empirical_bayes.hpp"
#include "error.hpp"

namespace oprisk::io {

/// Fixed 12-significant-digit rendering used for every floating-point output.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// x rounded to 12 significant digits, so JSON writers print the same digits as the CSV files.
inline double round12(double x) {
  if (!std::isfinite(x)) return x;
  return std::strtod(format_number(x).c_str(), nullptr);
}

struct LossRecord {
  std::int64_t year = 0;
  double amount = 0.0;
};

struct LossSample {
  std::string cell_id;
  std::vector<LossRecord> losses;
};

struct LossIngest {
  std::vector<LossSample> cells;
  std::map<std::string, std::size_t> below_threshold; ///< dropped per cell when a threshold was given
  std::vector<std::string> warnings;
};

struct CountIngest {
  CountPanel panel;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

template <class T>
T parse_field(std::string_view text, const std::filesystem::path& path, std::size_t line, const char* column) {
  text = trim(text);
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw validation_error(where(path, line) + "cannot parse " + column + " '" + std::string(text) + "'");
  }
  return value;
}

struct CsvTable {
  std::map<std::string, std::size_t> columns;
  std::vector<std::pair<std::size_t, std::vector<std::string_view>>> rows; ///< (line number, fields)
  std::string storage;
};

inline CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& required) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open '" + path.string() + "'");
  CsvTable t;
  std::ostringstream ss;
  ss << in.rdbuf();
  t.storage = ss.str();
  if (t.storage.size() >= 3 && t.storage.compare(0, 3, "\xEF\xBB\xBF") == 0) t.storage.erase(0, 3);

  std::string_view all(t.storage);
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!all.empty()) {
    const auto nl = all.find('\n');
    std::string_view line = all.substr(0, nl);
    all = (nl == std::string_view::npos) ? std::string_view{} : all.substr(nl + 1);
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_row(line);
    for (auto& f : fields) f = trim(f);
    if (!header_seen) {
      header_seen = true;
      for (std::size_t i = 0; i < fields.size(); ++i) t.columns[std::string(fields[i])] = i;
      for (const auto& name : required) {
        if (!t.columns.count(name)) throw validation_error(where(path, line_no) + "missing column '" + name + "'");
      }
      continue;
    }
    if (fields.size() != t.columns.size()) {
      throw validation_error(where(path, line_no) + "expected " + std::to_string(t.columns.size()) + " fields, found " +
                             std::to_string(fields.size()));
    }
    t.rows.emplace_back(line_no, std::move(fields));
  }
  if (!header_seen) throw validation_error("'" + path.string() + "': missing header row");
  return t;
}

} // namespace detail

/**
 * Count panel from a CSV with header `bank_id,year,count,exposure`. The
 * exposure column may be omitted (exposure 1). Banks keep their order of first
 * appearance and records their file order.
 */
inline CountIngest ingest_counts(const std::filesystem::path& path) {
  auto t = detail::read_csv(path, {"bank_id", "year", "count"});
  const auto c_bank = t.columns.at("bank_id");
  const auto c_year = t.columns.at("year");
  const auto c_count = t.columns.at("count");
  const auto exposure_it = t.columns.find("exposure");

  CountIngest out;
  std::map<std::string, std::size_t> index;
  for (const auto& [line, f] : t.rows) {
    const std::string bank(f[c_bank]);
    if (bank.empty()) throw validation_error(detail::where(path, line) + "empty bank_id");
    CountRecord r;
    r.year = detail::parse_field<std::int64_t>(f[c_year], path, line, "year");
    r.count = detail::parse_field<std::int64_t>(f[c_count], path, line, "count");
    if (r.count < 0) throw validation_error(detail::where(path, line) + "count must be non-negative");
    if (exposure_it != t.columns.end()) {
      r.exposure = detail::parse_field<double>(f[exposure_it->second], path, line, "exposure");
      if (!(r.exposure > 0.0) || !std::isfinite(r.exposure)) {
        throw validation_error(detail::where(path, line) + "exposure must be positive");
      }
    }
    auto [it, inserted] = index.emplace(bank, out.panel.banks.size());
    if (inserted) out.panel.banks.push_back(BankSeries{bank, {}});
    out.panel.banks[it->second].records.push_back(r);
  }
  if (out.panel.banks.empty()) out.warnings.push_back("'" + path.string() + "' has no data rows");
  return out;
}

/**
 * Losses from a CSV with header `cell_id,year,amount`. With a threshold L,
 * losses below L are dropped and counted per cell; without one every positive
 * amount is kept.
 */
inline LossIngest ingest_losses(const std::filesystem::path& path, std::optional<double> threshold = std::nullopt) {
  auto t = detail::read_csv(path, {"cell_id", "year", "amount"});
  const auto c_cell = t.columns.at("cell_id");
  const auto c_year = t.columns.at("year");
  const auto c_amount = t.columns.at("amount");

  LossIngest out;
  std::map<std::string, std::size_t> index;
  for (const auto& [line, f] : t.rows) {
    const std::string cell(f[c_cell]);
    if (cell.empty()) throw validation_error(detail::where(path, line) + "empty cell_id");
    LossRecord r;
    r.year = detail::parse_field<std::int64_t>(f[c_year], path, line, "year");
    r.amount = detail::parse_field<double>(f[c_amount], path, line, "amount");
    if (!(r.amount > 0.0) || !std::isfinite(r.amount)) {
      throw validation_error(detail::where(path, line) + "amount must be positive");
    }
    auto [it, inserted] = index.emplace(cell, out.cells.size());
    if (inserted) out.cells.push_back(LossSample{cell, {}});
    if (threshold && r.amount < *threshold) {
      ++out.below_threshold[cell];
      continue;
    }
    out.cells[it->second].losses.push_back(r);
  }
  for (const auto& [cell, n] : out.below_threshold) {
    out.warnings.push_back("cell '" + cell + "': " + std::to_string(n) + " losses below threshold " +
                           format_number(*threshold) + " excluded");
  }
  if (t.rows.empty()) out.warnings.push_back("'" + path.string() + "' has no data rows");
  return out;
}

inline void emit_counts(std::ostream& os, const CountPanel& panel) {
  os << "bank_id,year,count,exposure\n";
  for (const auto& b : panel.banks) {
    for (const auto& r : b.records) {
      os << b.bank_id << ',' << r.year << ',' << r.count << ',' << format_number(r.exposure) << '\n';
    }
  }
}

inline void emit_losses(std::ostream& os, const std::vector<LossSample>& cells) {
  os << "cell_id,year,amount\n";
  for (const auto& c : cells) {
    for (const auto& r : c.losses) os << c.cell_id << ',' << r.year << ',' << format_number(r.amount) << '\n';
  }
}

struct TrajectoryRow {
  std::size_t step = 0;
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  double bayes_estimate = 0.0;
  double mle_estimate = 0.0;
};

inline void emit_trajectory(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
  os << "step,alpha_hat,beta_hat,bayes_estimate,mle_estimate\n";
  for (const auto& r : rows) {
    os << r.step << ',' << format_number(r.alpha_hat) << ',' << format_number(r.beta_hat) << ','
       << format_number(r.bayes_estimate) << ',' << format_number(r.mle_estimate) << '\n';
  }
}

/// Write `content` to `path`, creating parent directories.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw validation_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw validation_error("failed writing '" + path.string() + "'");
}

} // namespace oprisk::io

#endif // OPRISK_IO_HPP
