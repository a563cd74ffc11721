// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icomp/bradley_terry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <sstream>

#include "icomp/error.hpp"

namespace icomp::bt {

namespace {

// Splits one CSV line, honoring double-quoted fields with "" escapes.
std::vector<std::string> split_csv(const std::string& line, std::size_t row) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  if (quoted) throw ParseError("row " + std::to_string(row) + ": unterminated quote");
  fields.push_back(std::move(current));
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

}  // namespace

std::size_t PairwiseTally::add_method(std::string_view name) {
  const auto it = std::find(methods_.begin(), methods_.end(), name);
  if (it != methods_.end()) return static_cast<std::size_t>(it - methods_.begin());
  methods_.emplace_back(name);
  for (auto& row : wins_) row.push_back(0);
  wins_.emplace_back(methods_.size(), 0);
  return methods_.size() - 1;
}

void PairwiseTally::record(std::string_view winner, std::string_view loser, std::int64_t count) {
  const std::size_t w = add_method(winner);
  const std::size_t l = add_method(loser);
  record(w, l, count);
}

void PairwiseTally::record(std::size_t winner, std::size_t loser, std::int64_t count) {
  if (winner >= size() || loser >= size()) throw DomainError("tally index out of range");
  if (winner == loser) throw DomainError("a method cannot be compared with itself: " + methods_[winner]);
  if (count < 0) throw DomainError("win counts must be non-negative");
  wins_[winner][loser] += count;
}

std::int64_t PairwiseTally::total_wins(std::size_t i) const {
  return std::accumulate(wins_[i].begin(), wins_[i].end(), std::int64_t{0});
}

std::int64_t PairwiseTally::total_comparisons() const {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < size(); ++i) total += total_wins(i);
  return total;
}

PairwiseTally PairwiseTally::scaled(std::int64_t factor) const {
  PairwiseTally out = *this;
  for (auto& row : out.wins_) {
    for (auto& w : row) w *= factor;
  }
  return out;
}

std::vector<Response> parse_responses(std::istream& csv) {
  std::vector<Response> rows;
  std::string line;
  bool header_seen = false;
  std::size_t row = 0;
  while (std::getline(csv, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      // Tolerate a UTF-8 byte order mark.
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (trim(line).empty()) continue;
      auto fields = split_csv(line, 0);
      for (auto& f : fields) f = trim(f);
      if (fields != std::vector<std::string>{"item_id", "method_a", "method_b", "choice"}) {
        throw ParseError("expected header item_id,method_a,method_b,choice");
      }
      header_seen = true;
      continue;
    }
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line, row);
    if (fields.size() != 4) {
      throw ParseError("row " + std::to_string(row) + ": expected 4 fields, got " + std::to_string(fields.size()));
    }
    for (auto& f : fields) f = trim(f);
    Response r;
    r.item_id = fields[0];
    r.method_a = fields[1];
    r.method_b = fields[2];
    if (r.method_a.empty() || r.method_b.empty()) {
      throw ParseError("row " + std::to_string(row) + ": empty method name");
    }
    if (r.method_a == r.method_b) {
      throw ParseError("row " + std::to_string(row) + ": method compared with itself");
    }
    if (fields[3] == "a" || fields[3] == "A") {
      r.choice = 'a';
    } else if (fields[3] == "b" || fields[3] == "B") {
      r.choice = 'b';
    } else {
      throw ParseError("row " + std::to_string(row) + ": choice must be 'a' or 'b', got '" + fields[3] + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

PairwiseTally ingest_responses(const std::vector<Response>& rows) {
  PairwiseTally tally;
  for (const auto& r : rows) {
    const std::size_t a = tally.add_method(r.method_a);
    const std::size_t b = tally.add_method(r.method_b);
    if (r.choice == 'a') tally.record(a, b);
    else tally.record(b, a);
  }
  return tally;
}

PairwiseTally ingest_responses(std::istream& csv) { return ingest_responses(parse_responses(csv)); }

Scores fit(const PairwiseTally& tally, const FitOptions& options) {
  const std::size_t n = tally.size();
  if (n == 0) throw NumericalError("no methods to rank");

  std::vector<std::vector<double>> wins(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) wins[i][j] = static_cast<double>(tally.wins(i, j));
  }
  if (options.smoothing) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && (tally.wins(i, j) + tally.wins(j, i)) > 0) wins[i][j] += 0.5;
      }
    }
  }

  // Connectivity of the undirected comparison graph.
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < n; ++j) {
      if (!seen[j] && (wins[i][j] + wins[j][i]) > 0.0) {
        seen[j] = 1;
        stack.push_back(j);
      }
    }
  }
  std::vector<std::string> unreachable;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) unreachable.push_back(tally.methods()[i]);
  }
  if (!unreachable.empty()) {
    throw NumericalError("comparison graph is disconnected; not reachable from " + tally.methods()[0] + ": " +
                         join_names(unreachable));
  }

  std::vector<double> total_wins(n, 0.0);
  std::vector<std::string> winless;
  for (std::size_t i = 0; i < n; ++i) {
    total_wins[i] = std::accumulate(wins[i].begin(), wins[i].end(), 0.0);
    if (total_wins[i] <= 0.0) winless.push_back(tally.methods()[i]);
  }
  if (!winless.empty() && n > 1) {
    throw NumericalError("methods without a single win have no finite ML score: " + join_names(winless));
  }

  Scores out;
  out.values.assign(n, 1.0 / static_cast<double>(n));
  if (n == 1) {
    out.converged = true;
    return out;
  }
  std::vector<double> next(n);
  for (int it = 1; it <= options.max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double games = wins[i][j] + wins[j][i];
        if (games > 0.0) denom += games / (out.values[i] + out.values[j]);
      }
      next[i] = total_wins[i] / denom;
    }
    const double sum = std::accumulate(next.begin(), next.end(), 0.0);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= sum;
      change = std::max(change, std::abs(next[i] - out.values[i]) / out.values[i]);
    }
    out.values.swap(next);
    out.iterations = it;
    if (change < options.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

double log_likelihood(const PairwiseTally& tally, const std::vector<double>& scores) {
  if (scores.size() != tally.size()) throw DomainError("score count differs from method count");
  double total = 0.0;
  for (std::size_t i = 0; i < tally.size(); ++i) {
    for (std::size_t j = 0; j < tally.size(); ++j) {
      const auto w = tally.wins(i, j);
      if (w > 0) total += static_cast<double>(w) * std::log(scores[i] / (scores[i] + scores[j]));
    }
  }
  return total;
}

std::vector<RankRow> rank(const PairwiseTally& tally, const Scores& scores) {
  if (scores.values.size() != tally.size()) throw DomainError("score count differs from method count");
  std::vector<RankRow> rows;
  rows.reserve(tally.size());
  for (std::size_t i = 0; i < tally.size(); ++i) rows.push_back({tally.methods()[i], scores.values[i]});
  std::stable_sort(rows.begin(), rows.end(), [](const RankRow& a, const RankRow& b) { return a.score > b.score; });
  return rows;
}

std::string format_table(const std::vector<RankRow>& rows) {
  std::size_t width = 6;  // "Method"
  for (const auto& r : rows) width = std::max(width, r.method.size());
  std::ostringstream out;
  auto pad = [width](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  out << pad("Method") << "  B-T Score\n";
  for (const auto& r : rows) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", r.score);
    out << pad(r.method) << "  " << buf << "\n";
  }
  return out.str();
}

nlohmann::json to_json(const std::vector<RankRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) out.push_back({{"method", r.method}, {"score", r.score}});
  return out;
}

}  // namespace icomp::bt
