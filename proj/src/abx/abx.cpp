#include "zrs/abx/abx.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <tuple>
#include <unordered_map>

namespace zrs {

std::vector<PhoneSegment> segments_from_labels(const Manifest& manifest,
                                               const LabelArchive& labels) {
  std::vector<PhoneSegment> out;
  for (const auto& [id, lab] : labels.entries()) {
    const auto& rec = manifest.at(id);
    std::size_t start = 0;
    for (std::size_t t = 1; t <= lab.size(); ++t) {
      if (t == lab.size() || lab[t] != lab[start]) {
        out.push_back({id, static_cast<int>(start), static_cast<int>(t),
                       std::to_string(lab[start]), rec.speaker_id, rec.language_id});
        start = t;
      }
    }
  }
  return out;
}

std::string to_string(AbxCondition c) {
  return c == AbxCondition::kWithin ? "within" : "across";
}

AbxCondition abx_condition_from_string(const std::string& s) {
  if (s == "within") return AbxCondition::kWithin;
  if (s == "across") return AbxCondition::kAcross;
  throw Error("unknown ABX condition '" + s + "'");
}

namespace {

/// Distinct draws from [0, total) via Floyd's algorithm, sorted.
std::vector<std::uint64_t> sample_distinct(std::uint64_t total, std::uint64_t k,
                                           std::mt19937_64& rng) {
  std::vector<std::uint64_t> out;
  if (k >= total) {
    out.resize(total);
    for (std::uint64_t i = 0; i < total; ++i) out[i] = i;
    return out;
  }
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = total - k; j < total; ++j) {
    std::uniform_int_distribution<std::uint64_t> d(0, j);
    const auto t = d(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace

TripletSet build_triplets(const std::vector<PhoneSegment>& segments,
                          AbxCondition condition, std::size_t max_per_cell,
                          std::uint64_t seed) {
  // language -> speaker -> phone -> segment indices, all ordered.
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<std::size_t>>>> idx;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    idx[s.language_id][s.speaker_id][s.phone].push_back(i);
  }
  TripletSet out;
  std::mt19937_64 rng(mix_seed(seed, condition == AbxCondition::kWithin ? 1 : 2));
  for (const auto& [lang, speakers] : idx) {
    std::set<std::string> phones;
    for (const auto& [_, by_phone] : speakers)
      for (const auto& [p, __] : by_phone) phones.insert(p);
    for (const auto& x : phones)
      for (const auto& y : phones) {
        if (x == y) continue;
        for (const auto& [s1, by_phone] : speakers)
          for (const auto& [s2, by_phone_x] : speakers) {
            if ((condition == AbxCondition::kWithin) != (s1 == s2)) continue;
            static const std::vector<std::size_t> none;
            auto tokens = [](const auto& m, const std::string& p) -> const std::vector<std::size_t>& {
              auto it = m.find(p);
              return it == m.end() ? none : it->second;
            };
            const auto& as = tokens(by_phone, x);
            const auto& bs = tokens(by_phone, y);
            const auto& xs = tokens(by_phone_x, x);
            // Within a speaker X must be a different token than A.
            const std::uint64_t nx = condition == AbxCondition::kWithin
                                         ? (xs.empty() ? 0 : xs.size() - 1)
                                         : xs.size();
            const std::uint64_t total = as.size() * bs.size() * nx;
            if (total == 0) {
              ++out.skipped_cells;
              continue;
            }
            for (auto code : sample_distinct(total, max_per_cell, rng)) {
              const auto ia = code % as.size();
              code /= as.size();
              const auto ib = code % bs.size();
              auto ix = code / bs.size();
              if (condition == AbxCondition::kWithin && ix >= ia) ++ix;
              out.triplets.push_back(
                  {segments[as[ia]], segments[bs[ib]], segments[xs[ix]], true});
            }
          }
      }
  }
  return out;
}

RepresentationLookup archive_lookup(const FeatureArchive& archive) {
  return [&archive](const PhoneSegment& s) -> FrameMatrix {
    if (!archive.contains(s.utterance_id))
      throw Error("abx: no representation for segment " + s.utterance_id + "[" +
                  std::to_string(s.start_frame) + "," + std::to_string(s.end_frame) + ")");
    const auto& f = archive.at(s.utterance_id);
    if (s.start_frame < 0 || s.end_frame > f.rows() || s.start_frame >= s.end_frame)
      throw Error("abx: segment " + s.utterance_id + "[" + std::to_string(s.start_frame) +
                  "," + std::to_string(s.end_frame) + ") outside its utterance");
    return f.middleRows(s.start_frame, s.end_frame - s.start_frame);
  };
}

double AbxReport::error(const std::string& language, AbxCondition condition) const {
  for (const auto& s : summaries)
    if (s.language == language && s.condition == condition) return s.error_rate;
  throw Error("abx report has no " + to_string(condition) + " entry for '" + language + "'");
}

double AbxReport::mean_error(AbxCondition condition) const {
  double sum = 0;
  int n = 0;
  for (const auto& s : summaries)
    if (s.condition == condition) {
      sum += s.error_rate;
      ++n;
    }
  if (n == 0) throw Error("abx report has no " + to_string(condition) + " entries");
  return sum / n;
}

void to_json(nlohmann::json& j, const AbxSummary& s) {
  j = {{"language", s.language},
       {"condition", to_string(s.condition)},
       {"error_rate", s.error_rate},
       {"cells", s.cells},
       {"triplets", s.triplets}};
}

void to_json(nlohmann::json& j, const AbxReport& r) {
  j = nlohmann::json::array();
  for (const auto& s : r.summaries) j.push_back(s);
}

void write_cells_csv(const AbxReport& report, std::ostream& out) {
  out << "language,condition,phone_x,phone_y,speaker_ab,speaker_x,triplets,error\n";
  for (const auto& c : report.cells) {
    out << c.language << ',' << to_string(c.condition) << ',' << c.phone_x << ','
        << c.phone_y << ',' << c.speaker_ab << ',' << c.speaker_x << ',' << c.triplets
        << ',' << nlohmann::json(c.error).dump() << '\n';
  }
}

namespace {

using SegmentKey = std::tuple<std::string, int, int>;

SegmentKey key_of(const PhoneSegment& s) {
  return {s.utterance_id, s.start_frame, s.end_frame};
}

}  // namespace

AbxReport score(const std::vector<AbxTriplet>& triplets, const RepresentationLookup& lookup,
                FrameMetric metric) {
  std::map<SegmentKey, FrameMatrix> reps;
  auto rep = [&](const PhoneSegment& s) -> const FrameMatrix& {
    auto k = key_of(s);
    auto it = reps.find(k);
    if (it == reps.end()) it = reps.emplace(std::move(k), lookup(s)).first;
    return it->second;
  };
  std::map<std::pair<SegmentKey, SegmentKey>, double> dist_cache;
  auto dist = [&](const PhoneSegment& p, const PhoneSegment& q) {
    auto k = std::make_pair(key_of(p), key_of(q));
    auto it = dist_cache.find(k);
    if (it != dist_cache.end()) return it->second;
    const double d = dtw_distance(rep(p), rep(q), metric);
    dist_cache.emplace(std::move(k), d);
    return d;
  };

  using CellKey = std::tuple<std::string, int, std::string, std::string, std::string, std::string>;
  std::map<CellKey, std::pair<double, std::size_t>> cells;
  for (const auto& t : triplets) {
    if (t.a.speaker_id != t.b.speaker_id || t.a.phone == t.b.phone)
      throw Error("abx: malformed triplet");
    const auto cond = t.x.speaker_id == t.a.speaker_id ? AbxCondition::kWithin : AbxCondition::kAcross;
    const double dax = dist(t.a, t.x);
    const double dbx = dist(t.b, t.x);
    double err;
    if (dax == dbx) {
      err = 0.5;
    } else {
      err = (t.x_on_a_side ? dax > dbx : dbx > dax) ? 1.0 : 0.0;
    }
    const auto& own = t.x_on_a_side ? t.a : t.b;
    const auto& other = t.x_on_a_side ? t.b : t.a;
    auto& cell = cells[{t.a.language_id, static_cast<int>(cond), own.phone, other.phone,
                        t.a.speaker_id, t.x.speaker_id}];
    cell.first += err;
    cell.second += 1;
  }

  AbxReport report;
  std::map<std::pair<std::string, int>, AbxSummary> summaries;
  for (const auto& [k, v] : cells) {
    AbxCell c;
    c.language = std::get<0>(k);
    c.condition = static_cast<AbxCondition>(std::get<1>(k));
    c.phone_x = std::get<2>(k);
    c.phone_y = std::get<3>(k);
    c.speaker_ab = std::get<4>(k);
    c.speaker_x = std::get<5>(k);
    c.triplets = v.second;
    c.error = v.first / static_cast<double>(v.second);
    auto& s = summaries[{c.language, std::get<1>(k)}];
    s.language = c.language;
    s.condition = c.condition;
    s.error_rate += c.error;
    s.cells += 1;
    s.triplets += c.triplets;
    report.cells.push_back(std::move(c));
  }
  for (auto& [_, s] : summaries) {
    s.error_rate /= static_cast<double>(s.cells);
    report.summaries.push_back(s);
  }
  return report;
}

AbxReport evaluate_abx(const std::vector<PhoneSegment>& segments,
                       const FeatureArchive& representation, std::size_t max_per_cell,
                       std::uint64_t seed, FrameMetric metric) {
  auto within = build_triplets(segments, AbxCondition::kWithin, max_per_cell, seed);
  auto across = build_triplets(segments, AbxCondition::kAcross, max_per_cell, seed);
  auto all = std::move(within.triplets);
  all.insert(all.end(), across.triplets.begin(), across.triplets.end());
  return score(all, archive_lookup(representation), metric);
}

}  // namespace zrs
