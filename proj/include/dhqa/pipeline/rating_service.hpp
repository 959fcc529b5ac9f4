#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

// <resolv.h>, pulled in by httplib, defines `_res` as a macro, which breaks
// any Eigen header included after this one.
#ifdef _res
#undef _res
#endif

#include "dhqa/pipeline/manifest.hpp"
#include "dhqa/subjective.hpp"

// Rating-session service. RatingService holds the session logic and the
// ratings file; mount_rating_api binds it to HTTP routes.
//
//   GET  /api/session/{sid}/next?subject=ID
//        -> {stimulus_id, reference_image_url, distorted_image_url, progress}
//           or {complete: true, progress} once every stimulus is rated
//   POST /api/session/{sid}/rate   {subject, stimulus_id, score}
//   GET  /api/session/{sid}/export -> ratings CSV of this session
//   GET  /api/session/{sid}/image/{k}/{reference|distorted}

namespace dhqa::pipeline {

struct StimulusPair {
  std::string stimulus_id;
  std::filesystem::path reference_image;
  std::filesystem::path distorted_image;
};

struct SessionSpec {
  std::string id;
  std::vector<StimulusPair> stimuli;
};

struct ServiceConfig {
  std::vector<SessionSpec> sessions;
  std::uint64_t seed = 0;
  std::filesystem::path ratings_csv;  ///< shared by all sessions, append-only
  std::filesystem::path static_dir;   ///< UI bundle; empty disables static serving
};

/// Builds a service config from a JSON session file:
///   {"schema_version": 1, "render_manifest": ..., "view": "front", "seed": 0,
///    "ratings": "ratings.csv", "static_dir": "...",
///    "sessions": [{"id": "s01", "stimuli": [...]}]   or   "session_size": 140}
/// Without "sessions", distorted stimuli are shuffled by seed and cut into
/// consecutive sessions of "session_size" (default: one session "default").
/// Relative paths are taken against the session file's directory.
inline ServiceConfig load_service_config(const std::filesystem::path& file) {
  const auto path = std::filesystem::absolute(resolve(file));
  std::ifstream in(path);
  if (!in) throw IoError("cannot open session config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("session config " + path.string() + ": " + e.what());
  }
  if (j.value("schema_version", 0) != kManifestSchema)
    throw FormatError("session config " + path.string() + ": expected schema_version " + std::to_string(kManifestSchema));
  const auto base = path.parent_path();
  auto rel = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base / p; };

  ServiceConfig cfg;
  try {
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.ratings_csv = rel(j.value("ratings", std::string("ratings.csv")));
    if (j.contains("static_dir")) cfg.static_dir = rel(j.at("static_dir").get<std::string>());
    const auto view = j.value("view", std::string("front"));
    const auto manifest_path = rel(j.at("render_manifest").get<std::string>());
    const auto rm = read_manifest(manifest_path);
    expect_stage(rm, "render", manifest_path);
    std::map<std::string, StimulusPair> pairs;
    std::map<std::string, std::filesystem::path> ref_images;
    for (const auto& a : rm.outputs)
      if (a.kind == "image" && a.view == view && a.role == "reference") ref_images[a.stimulus_id] = manifest_path.parent_path() / a.path;
    for (const auto& a : rm.outputs)
      if (a.kind == "image" && a.view == view && a.role == "distorted") {
        const auto r = ref_images.find(a.reference_id);
        if (r == ref_images.end()) throw FormatError("no reference image for " + a.stimulus_id);
        pairs[a.stimulus_id] = {a.stimulus_id, r->second, manifest_path.parent_path() / a.path};
      }
    auto pair_of = [&](const std::string& sid) {
      const auto it = pairs.find(sid);
      if (it == pairs.end()) throw FormatError("session config: stimulus " + sid + " has no " + view + " projection");
      return it->second;
    };
    if (j.contains("sessions")) {
      for (const auto& s : j.at("sessions")) {
        SessionSpec spec{s.at("id"), {}};
        for (const auto& sid : s.at("stimuli")) spec.stimuli.push_back(pair_of(sid));
        cfg.sessions.push_back(std::move(spec));
      }
    } else {
      std::vector<std::string> ids;
      for (const auto& [sid, p] : pairs) ids.push_back(sid);
      std::shuffle(ids.begin(), ids.end(), std::mt19937_64(cfg.seed));
      const std::size_t size = j.value("session_size", ids.size());
      if (size == 0) throw FormatError("session config: session_size must be positive");
      for (std::size_t i = 0; i < ids.size(); i += size) {
        char name[32];
        std::snprintf(name, sizeof name, "s%02zu", i / size + 1);
        SessionSpec spec{size >= ids.size() ? std::string("default") : std::string(name), {}};
        for (std::size_t k = i; k < std::min(ids.size(), i + size); ++k) spec.stimuli.push_back(pair_of(ids[k]));
        cfg.sessions.push_back(std::move(spec));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("session config " + path.string() + ": " + e.what());
  }
  return cfg;
}

class RatingService {
 public:
  struct Reply {
    int status = 200;
    nlohmann::json body;
  };

  /// Opens (or creates) the ratings file and replays earlier ratings so a
  /// restarted service resumes every subject at the right position.
  explicit RatingService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
    for (const auto& s : cfg_.sessions) {
      subjective::detail::check_field(s.id, "session id");
      if (s.stimuli.empty()) throw InvalidArgument("session " + s.id + " has no stimuli");
      std::set<std::string> seen;
      for (const auto& p : s.stimuli)
        if (!seen.insert(p.stimulus_id).second) throw InvalidArgument("session " + s.id + " lists " + p.stimulus_id + " twice");
      if (!sessions_.emplace(s.id, &s).second) throw InvalidArgument("duplicate session id " + s.id);
    }
    if (cfg_.ratings_csv.empty()) throw InvalidArgument("rating service needs a ratings file");
    if (std::filesystem::exists(cfg_.ratings_csv) && std::filesystem::file_size(cfg_.ratings_csv) > 0) {
      const auto table = subjective::read_ratings_csv(cfg_.ratings_csv);
      for (const auto& r : table.records()) {
        records_.push_back(r);
        if (!sessions_.count(r.session_id)) continue;
        auto& st = state(r.session_id, r.subject_id);
        st.rated.insert(r.stimulus_id);
        advance(st);
      }
    }
    fd_ = ::open(cfg_.ratings_csv.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open ratings file " + cfg_.ratings_csv.string());
    if (records_.empty() && std::filesystem::file_size(cfg_.ratings_csv) == 0) append(std::string(subjective::kRatingsHeader) + "\n");
  }

  ~RatingService() {
    if (fd_ >= 0) ::close(fd_);
  }
  RatingService(const RatingService&) = delete;
  RatingService& operator=(const RatingService&) = delete;

  const ServiceConfig& config() const { return cfg_; }

  /// The subject's current stimulus. Repeated calls return the same
  /// stimulus until it is rated, so a page reload resumes in place.
  Reply next(const std::string& sid, const std::string& subject) {
    std::lock_guard lock(mu_);
    if (auto err = check(sid, subject)) return *err;
    auto& st = state(sid, subject);
    const auto& s = *sessions_.at(sid);
    nlohmann::json progress{{"completed", st.rated.size()}, {"total", s.stimuli.size()}};
    if (st.cursor >= st.order.size()) return {200, {{"complete", true}, {"progress", progress}}};
    const auto k = st.order[st.cursor];
    st.served = true;
    const auto base = "/api/session/" + sid + "/image/" + std::to_string(k);
    return {200,
            {{"complete", false},
             {"stimulus_id", s.stimuli[k].stimulus_id},
             {"reference_image_url", base + "/reference"},
             {"distorted_image_url", base + "/distorted"},
             {"progress", progress}}};
  }

  /// Accepts an integer score in [0,100] for the stimulus last served to
  /// this subject. The record is on disk before the reply is returned.
  Reply rate(const std::string& sid, const std::string& subject, const std::string& stimulus, const nlohmann::json& score) {
    if (!score.is_number_integer() && !(score.is_number_float() && std::floor(score.get<double>()) == score.get<double>()))
      return error(400, "score must be an integer");
    const double value = score.get<double>();
    if (value < 0.0 || value > 100.0) return error(400, "score must be within [0, 100]");
    std::lock_guard lock(mu_);
    if (auto err = check(sid, subject)) return *err;
    auto& st = state(sid, subject);
    const auto& s = *sessions_.at(sid);
    if (st.rated.count(stimulus)) return error(409, "stimulus already rated by this subject");
    if (st.cursor >= st.order.size() || !st.served || s.stimuli[st.order[st.cursor]].stimulus_id != stimulus)
      return error(409, "stimulus has not been served to this subject");
    const subjective::Rating r{subject, stimulus, value, sid, utc_timestamp()};
    append(subjective::format_rating_row(r) + "\n");
    records_.push_back(r);
    st.rated.insert(stimulus);
    advance(st);
    return {200, {{"ok", true}, {"progress", {{"completed", st.rated.size()}, {"total", s.stimuli.size()}}}}};
  }

  /// The session's ratings in submission order, in the ratings CSV schema.
  std::string export_csv(const std::string& sid) const {
    std::lock_guard lock(mu_);
    std::string out = std::string(subjective::kRatingsHeader) + "\n";
    for (const auto& r : records_)
      if (r.session_id == sid) out += subjective::format_rating_row(r) + "\n";
    return out;
  }

  bool has_session(const std::string& sid) const { return sessions_.count(sid) > 0; }

  /// Image file behind an opaque image URL, or empty if there is none.
  std::filesystem::path image(const std::string& sid, std::size_t k, const std::string& side) const {
    const auto it = sessions_.find(sid);
    if (it == sessions_.end() || k >= it->second->stimuli.size()) return {};
    if (side == "reference") return it->second->stimuli[k].reference_image;
    if (side == "distorted") return it->second->stimuli[k].distorted_image;
    return {};
  }

  /// Presentation order (indices into the session's stimulus list), seeded
  /// by (service seed, session, subject).
  std::vector<std::size_t> order(const std::string& sid, const std::string& subject) const {
    std::vector<std::size_t> idx(sessions_.at(sid)->stimuli.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(derive_seed(cfg_.seed, hash_string(sid), hash_string(subject)));
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
  }

 private:
  struct SubjectState {
    std::string session;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    bool served = false;  ///< order[cursor] has been handed out
    std::set<std::string> rated;
  };

  static Reply error(int status, const std::string& msg) { return {status, {{"error", msg}}}; }

  std::optional<Reply> check(const std::string& sid, const std::string& subject) const {
    if (!sessions_.count(sid)) return error(404, "unknown session " + sid);
    try {
      subjective::detail::check_field(subject, "subject");
    } catch (const InvalidArgument& e) {
      return error(400, e.what());
    }
    return std::nullopt;
  }

  SubjectState& state(const std::string& sid, const std::string& subject) {
    auto [it, fresh] = states_.try_emplace({sid, subject});
    if (fresh) {
      it->second.session = sid;
      it->second.order = order(sid, subject);
    }
    return it->second;
  }

  void advance(SubjectState& st) const {
    const auto& stimuli = sessions_.at(st.session)->stimuli;
    while (st.cursor < st.order.size() && st.rated.count(stimuli[st.order[st.cursor]].stimulus_id)) ++st.cursor;
    st.served = false;
  }

  void append(const std::string& line) {
    const char* p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      const auto n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("write to ratings file failed");
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw IoError("fsync of ratings file failed");
  }

  ServiceConfig cfg_;
  std::map<std::string, const SessionSpec*> sessions_;
  std::map<std::pair<std::string, std::string>, SubjectState> states_;
  std::vector<subjective::Rating> records_;
  mutable std::mutex mu_;
  int fd_ = -1;
};

/// Registers the API routes (and the static UI mount, if configured).
inline void mount_rating_api(httplib::Server& server, RatingService& service) {
  auto send = [](httplib::Response& res, const RatingService::Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/api/session/:sid/next", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.next(req.path_params.at("sid"), req.get_param_value("subject")));
  });
  server.Post("/api/session/:sid/rate", [&service, send](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      return send(res, {400, {{"error", "request body is not JSON"}}});
    }
    if (!body.is_object() || !body.contains("score") || !body.contains("stimulus_id") || !body["stimulus_id"].is_string())
      return send(res, {400, {{"error", "expected {subject, stimulus_id, score}"}}});
    const auto subject = body.value("subject", req.get_param_value("subject"));
    try {
      send(res, service.rate(req.path_params.at("sid"), subject, body["stimulus_id"], body["score"]));
    } catch (const IoError& e) {
      send(res, {500, {{"error", e.what()}}});
    }
  });
  server.Get("/api/session/:sid/export", [&service, send](const httplib::Request& req, httplib::Response& res) {
    const auto& sid = req.path_params.at("sid");
    if (!service.has_session(sid)) return send(res, {404, {{"error", "unknown session " + sid}}});
    res.set_content(service.export_csv(sid), "text/csv");
  });
  server.Get("/api/session/:sid/image/:k/:side", [&service, send](const httplib::Request& req, httplib::Response& res) {
    std::size_t k = 0;
    try {
      k = std::stoul(req.path_params.at("k"));
    } catch (const std::exception&) {
      return send(res, {404, {{"error", "no such image"}}});
    }
    const auto path = service.image(req.path_params.at("sid"), k, req.path_params.at("side"));
    std::ifstream in(path, std::ios::binary);
    if (path.empty() || !in) return send(res, {404, {{"error", "no such image"}}});
    std::ostringstream bytes;
    bytes << in.rdbuf();
    res.set_content(bytes.str(), "image/png");
  });
  if (!service.config().static_dir.empty() && !server.set_mount_point("/", service.config().static_dir.string()))
    throw IoError("cannot serve static directory " + service.config().static_dir.string());
}

/// Blocks serving the rating API until the server is stopped.
inline void serve_ratings(const std::string& host, int port, const ServiceConfig& cfg) {
  RatingService service(cfg);
  httplib::Server server;
  mount_rating_api(server, service);
  if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace dhqa::pipeline
