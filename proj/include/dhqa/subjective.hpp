#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dhqa/common.hpp"

namespace dhqa::subjective {

struct Rating {
  std::string subject_id;
  std::string stimulus_id;
  double score = 0.0;
  std::string session_id;
  std::string timestamp;  ///< ISO 8601, opaque here
};

namespace detail {

inline void check_field(const std::string& s, const char* what) {
  if (s.empty()) throw InvalidArgument(std::string(what) + " must not be empty");
  if (s.find_first_of(",\r\n\"") != std::string::npos)
    throw InvalidArgument(std::string(what) + " may not contain commas, quotes or newlines: " + s);
}

}  // namespace detail

/// Raw ratings with at most one record per (subject, stimulus).
class RatingTable {
 public:
  explicit RatingTable(double scale_min = 0.0, double scale_max = 100.0) : lo_(scale_min), hi_(scale_max) {
    if (!(scale_min < scale_max)) throw InvalidArgument("rating scale must have min < max");
  }

  void add(Rating r) {
    detail::check_field(r.subject_id, "subject_id");
    detail::check_field(r.stimulus_id, "stimulus_id");
    if (!r.session_id.empty()) detail::check_field(r.session_id, "session_id");
    if (r.timestamp.find_first_of(",\r\n") != std::string::npos) throw InvalidArgument("bad timestamp");
    if (!(r.score >= lo_ && r.score <= hi_))
      throw InvalidArgument("score " + std::to_string(r.score) + " outside rating scale");
    if (!seen_.insert({r.subject_id, r.stimulus_id}).second)
      throw InvalidArgument("duplicate rating for subject " + r.subject_id + ", stimulus " + r.stimulus_id);
    records_.push_back(std::move(r));
  }

  const std::vector<Rating>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  double scale_min() const { return lo_; }
  double scale_max() const { return hi_; }

  std::vector<std::string> subjects() const {
    std::set<std::string> s;
    for (const auto& r : records_) s.insert(r.subject_id);
    return {s.begin(), s.end()};
  }

  /// Copy keeping only the given subjects' records.
  RatingTable restricted_to(const std::set<std::string>& subjects) const {
    RatingTable out(lo_, hi_);
    for (const auto& r : records_)
      if (subjects.count(r.subject_id)) out.add(r);
    return out;
  }

 private:
  double lo_, hi_;
  std::vector<Rating> records_;
  std::set<std::pair<std::string, std::string>> seen_;
};

struct ZRecord {
  std::string subject_id;
  std::string stimulus_id;
  std::string session_id;
  double z = 0.0;
};

struct ExcludedSubject {
  std::string subject_id;
  std::string reason;
};

struct ZScores {
  std::vector<ZRecord> records;  ///< retained subjects only, in table order
  std::vector<ExcludedSubject> excluded;
};

/// Per-subject standardization with the sample standard deviation. Subjects
/// with fewer than two ratings or zero variance are excluded and reported.
inline ZScores zscore(const RatingTable& table) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& r : table.records()) {
    acc[r.subject_id].sum += r.score;
    ++acc[r.subject_id].n;
  }
  std::map<std::string, std::pair<double, double>> stats;  // mean, std
  ZScores out;
  for (const auto& [subject, a] : acc) {
    const double mean = a.sum / static_cast<double>(a.n);
    if (a.n < 2) {
      out.excluded.push_back({subject, "fewer than 2 ratings"});
      continue;
    }
    double ss = 0.0;
    for (const auto& r : table.records())
      if (r.subject_id == subject) ss += (r.score - mean) * (r.score - mean);
    const double sd = std::sqrt(ss / static_cast<double>(a.n - 1));
    if (sd == 0.0) {
      out.excluded.push_back({subject, "constant ratings (zero variance)"});
      continue;
    }
    stats[subject] = {mean, sd};
  }
  for (const auto& r : table.records()) {
    const auto it = stats.find(r.subject_id);
    if (it == stats.end()) continue;
    out.records.push_back({r.subject_id, r.stimulus_id, r.session_id, (r.score - it->second.first) / it->second.second});
  }
  return out;
}

struct SubjectScreening {
  std::string subject_id;
  int p = 0;  ///< ratings above the upper bound
  int q = 0;  ///< ratings below the lower bound
  int n = 0;  ///< ratings considered
  bool rejected = false;
};

struct ScreeningResult {
  std::vector<std::string> kept;
  std::vector<std::string> rejected;
  std::vector<SubjectScreening> report;  ///< one row per subject, sorted by id
};

inline constexpr std::size_t kMinSubjectsPerStimulus = 3;

namespace detail {

struct Scored {
  const std::string* subject;
  const std::string* stimulus;
  double value;
};

inline ScreeningResult screen(const std::vector<Scored>& scored, const std::vector<std::string>& subjects) {
  std::map<std::string, std::vector<const Scored*>> by_stimulus;
  for (const auto& r : scored) by_stimulus[*r.stimulus].push_back(&r);
  std::map<std::string, SubjectScreening> rows;
  for (const auto& s : subjects) rows[s].subject_id = s;

  for (const auto& [stimulus, ratings] : by_stimulus) {
    const std::size_t n = ratings.size();
    if (n < kMinSubjectsPerStimulus)
      throw InvalidArgument("stimulus " + stimulus + " has " + std::to_string(n) + " ratings; screening needs at least " +
                            std::to_string(kMinSubjectsPerStimulus));
    double mean = 0.0;
    for (const auto* r : ratings) mean += r->value;
    mean /= static_cast<double>(n);
    double m2 = 0.0, m4 = 0.0;
    for (const auto* r : ratings) {
      const double d = r->value - mean;
      m2 += d * d;
      m4 += d * d * d * d;
    }
    const double sd = std::sqrt(m2 / static_cast<double>(n - 1));
    m2 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    const double kurtosis = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
    const double width = (kurtosis >= 2.0 && kurtosis <= 4.0) ? 2.0 * sd : std::sqrt(20.0) * sd;
    for (const auto* r : ratings) {
      auto& row = rows[*r->subject];
      ++row.n;
      if (sd == 0.0) continue;
      if (r->value >= mean + width) ++row.p;
      if (r->value <= mean - width) ++row.q;
    }
  }

  ScreeningResult out;
  for (auto& [id, row] : rows) {
    const int pq = row.p + row.q;
    row.rejected = row.n > 0 && pq > 0 && static_cast<double>(pq) / row.n > 0.05 &&
                   std::abs(row.p - row.q) / static_cast<double>(pq) < 0.3;
    (row.rejected ? out.rejected : out.kept).push_back(id);
    out.report.push_back(row);
  }
  return out;
}

}  // namespace detail

/// Single-pass outlier-subject screening: per stimulus, a value beyond
/// mean +/- 2 std (kurtosis in [2,4], near-normal) or mean +/- sqrt(20) std
/// (otherwise) counts against its subject. A subject is rejected when
/// (P+Q)/N > 0.05 and |P-Q|/(P+Q) < 0.3.
inline ScreeningResult screen_subjects(const RatingTable& table) {
  std::vector<detail::Scored> scored;
  for (const auto& r : table.records()) scored.push_back({&r.subject_id, &r.stimulus_id, r.score});
  return detail::screen(scored, table.subjects());
}

/// Same rule applied to z-scores, which is what derive_mos uses.
inline ScreeningResult screen_subjects(const std::vector<ZRecord>& records) {
  std::vector<detail::Scored> scored;
  std::set<std::string> subjects;
  for (const auto& r : records) {
    scored.push_back({&r.subject_id, &r.stimulus_id, r.z});
    subjects.insert(r.subject_id);
  }
  return detail::screen(scored, {subjects.begin(), subjects.end()});
}

struct MosEntry {
  double mos = 0.0;
  int count = 0;
  double stddev = 0.0;  ///< sample std of the rescaled values (0 for a single rating)
};

using MosTable = std::map<std::string, MosEntry>;

enum class RescaleMode {
  Global,      ///< one min/max over all retained records
  PerSession,  ///< min/max within each session_id
};

/// Rescaled z (min -> 0, max -> 100) averaged per stimulus.
inline MosTable compute_mos(const std::vector<ZRecord>& records, RescaleMode mode = RescaleMode::Global) {
  if (records.empty()) throw InvalidArgument("compute_mos needs at least one record");
  std::map<std::string, std::pair<double, double>> range;  // group -> (min, max)
  auto group_of = [&](const ZRecord& r) { return mode == RescaleMode::Global ? std::string() : r.session_id; };
  for (const auto& r : records) {
    auto [it, fresh] = range.try_emplace(group_of(r), r.z, r.z);
    if (!fresh) {
      it->second.first = std::min(it->second.first, r.z);
      it->second.second = std::max(it->second.second, r.z);
    }
  }
  for (const auto& [g, mm] : range)
    if (!(mm.second > mm.first))
      throw InvalidArgument("all z-scores are equal" + (g.empty() ? std::string() : " in session " + g) +
                            "; rescaling is undefined");

  std::map<std::string, std::vector<double>> values;
  for (const auto& r : records) {
    const auto [lo, hi] = range.at(group_of(r));
    values[r.stimulus_id].push_back(std::clamp(100.0 * (r.z - lo) / (hi - lo), 0.0, 100.0));
  }
  MosTable out;
  for (const auto& [stimulus, v] : values) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[stimulus] = {mean, static_cast<int>(v.size()), v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
  }
  return out;
}

struct MosOptions {
  bool screen = true;
  RescaleMode rescale = RescaleMode::Global;
};

struct MosReport {
  MosTable mos;
  std::vector<ExcludedSubject> excluded;  ///< zero-variance / too few ratings
  ScreeningResult screening;              ///< empty when screening is off
};

/// Full chain: z-scores, screening on the z-scores, then rescaling and
/// averaging over the kept subjects.
inline MosReport derive_mos(const RatingTable& table, const MosOptions& opt = {}) {
  MosReport rep;
  auto z = zscore(table);
  rep.excluded = std::move(z.excluded);
  if (opt.screen) {
    rep.screening = screen_subjects(z.records);
    const std::set<std::string> keep(rep.screening.kept.begin(), rep.screening.kept.end());
    std::erase_if(z.records, [&](const ZRecord& r) { return !keep.count(r.subject_id); });
  }
  rep.mos = compute_mos(z.records, opt.rescale);
  return rep;
}

// ---- CSV ----

inline constexpr const char* kRatingsHeader = "subject_id,stimulus_id,score,session_id,timestamp_iso8601";
inline constexpr const char* kMosHeader = "stimulus_id,mos,count,stddev";

namespace detail {

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("not a number '" + s + "' at " + where);
  }
}

inline std::vector<std::vector<std::string>> read_csv_rows(std::istream& in, const std::string& header,
                                                           const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (trim(line) != header) throw FormatError(name + ": expected header '" + header + "'");
  const auto width = split(header, ',').size();
  std::vector<std::vector<std::string>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != width)
      throw FormatError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) + " fields");
    for (auto& c : cells) c = trim(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

inline RatingTable read_ratings_csv(std::istream& in, double scale_min = 0.0, double scale_max = 100.0) {
  RatingTable t(scale_min, scale_max);
  int row = 1;
  for (auto& c : detail::read_csv_rows(in, kRatingsHeader, "ratings")) {
    ++row;
    t.add({c[0], c[1], detail::parse_double(c[2], "ratings row " + std::to_string(row)), c[3], c[4]});
  }
  return t;
}

inline RatingTable read_ratings_csv(const std::filesystem::path& path, double scale_min = 0.0,
                                    double scale_max = 100.0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ratings file: " + path.string());
  return read_ratings_csv(in, scale_min, scale_max);
}

inline std::string format_rating_row(const Rating& r) {
  return r.subject_id + "," + r.stimulus_id + "," + detail::fmt(r.score) + "," + r.session_id + "," + r.timestamp;
}

inline void write_ratings_csv(const RatingTable& t, std::ostream& out) {
  out << kRatingsHeader << '\n';
  for (const auto& r : t.records()) out << format_rating_row(r) << '\n';
}

inline MosTable read_mos_csv(std::istream& in) {
  MosTable t;
  int row = 1;
  for (auto& c : detail::read_csv_rows(in, kMosHeader, "mos")) {
    const std::string where = "mos row " + std::to_string(++row);
    const double mos = detail::parse_double(c[1], where);
    const double count = detail::parse_double(c[2], where);
    if (mos < 0.0 || mos > 100.0) throw FormatError("MOS outside [0,100] at " + where);
    if (count < 1 || count != std::floor(count)) throw FormatError("bad rating count at " + where);
    if (!t.emplace(c[0], MosEntry{mos, static_cast<int>(count), detail::parse_double(c[3], where)}).second)
      throw FormatError("duplicate stimulus " + c[0] + " at " + where);
  }
  return t;
}

inline MosTable read_mos_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open MOS file: " + path.string());
  return read_mos_csv(in);
}

inline void write_mos_csv(const MosTable& t, std::ostream& out) {
  out << kMosHeader << '\n';
  for (const auto& [id, e] : t) out << id << ',' << detail::fmt(e.mos) << ',' << e.count << ',' << detail::fmt(e.stddev) << '\n';
}

}  // namespace dhqa::subjective
