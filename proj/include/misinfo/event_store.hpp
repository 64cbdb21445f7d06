#pragma once

// Append-only JSON-lines persistence for an experiment directory:
//
//   <dir>/events.jsonl    one InteractionEvent per line
//   <dir>/sessions.jsonl  session index: creation, stage changes,
//                         questionnaire results, pre-generated interventions
//
// Crash recovery replays both files. A final line without its newline is the
// remains of an interrupted write and is dropped; any other unparsable line
// makes the log corrupt.

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "misinfo/domain.hpp"

namespace misinfo {

enum class Stage { Consent, Instructions, Questionnaire, Feed, Done, Disqualified };

inline constexpr detail::EnumNames<Stage, 6> kStageNames{{{{Stage::Consent, "Consent"},
                                                           {Stage::Instructions, "Instructions"},
                                                           {Stage::Questionnaire, "Questionnaire"},
                                                           {Stage::Feed, "Feed"},
                                                           {Stage::Done, "Done"},
                                                           {Stage::Disqualified, "Disqualified"}}}};

inline std::string_view to_string(Stage s) { return kStageNames.name(s); }
inline Stage parse_stage(std::string_view s) {
  return detail::parse_enum(kStageNames, s, "stage");
}

/// Everything the session index knows about one session.
struct SessionRecord {
  std::string session_id;
  std::string user_id;
  InterventionArm arm = InterventionArm::Control;
  std::vector<std::string> feed;
  int trial = 0;
  std::int64_t created_at = 0;
  Stage stage = Stage::Consent;
  std::optional<UserProfile> profile;
  std::optional<std::pair<std::string, std::string>> attention;
  std::optional<bool> attention_passed;
  std::map<std::string, InterventionText> interventions;  // by claim id

  bool operator==(const SessionRecord&) const = default;
};

namespace detail {

class AppendFile {
 public:
  AppendFile() = default;
  explicit AppendFile(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::CorruptLog, "cannot open " + path.string());
  }
  AppendFile(const AppendFile&) = delete;
  AppendFile& operator=(const AppendFile&) = delete;
  AppendFile(AppendFile&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  AppendFile& operator=(AppendFile&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~AppendFile() { close(); }

  void write_line(const std::string& line) {
    std::string buf = line;
    buf.push_back('\n');
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
      const auto n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::CorruptLog, "write failed");
      }
      p += n;
      left -= std::size_t(n);
    }
  }

  void sync() {
    if (fd_ >= 0) ::fsync(fd_);
  }

 private:
  void close() {
    if (fd_ >= 0) {
      ::fsync(fd_);
      ::close(fd_);
      fd_ = -1;
    }
  }
  int fd_ = -1;
};

/// Reads complete lines. Returns the byte length of the valid prefix.
template <typename Fn>
std::uintmax_t read_lines(const std::filesystem::path& path, Fn&& on_line) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return 0;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // torn final write
    ++line_no;
    const std::string line = content.substr(pos, nl - pos);
    if (!line.empty()) {
      try {
        on_line(json::parse(line));
      } catch (const std::exception& e) {
        throw Error(ErrorCode::CorruptLog, path.filename().string() + ": " + e.what(),
                    "line " + std::to_string(line_no) + " offset " + std::to_string(pos));
      }
    }
    pos = nl + 1;
  }
  return pos;
}

}  // namespace detail

inline json session_created_json(const SessionRecord& s) {
  return json{{"type", "created"},       {"session_id", s.session_id}, {"user_id", s.user_id},
              {"arm", to_string(s.arm)}, {"feed", s.feed},             {"trial", s.trial},
              {"created_at", s.created_at}};
}

/// Applies one session-index line to the record map.
inline void apply_session_line(std::map<std::string, SessionRecord>& sessions, const json& j) {
  const auto type = j.at("type").get<std::string>();
  const auto sid = j.at("session_id").get<std::string>();
  if (type == "created") {
    SessionRecord r;
    r.session_id = sid;
    r.user_id = j.at("user_id").get<std::string>();
    r.arm = parse_arm(j.at("arm").get<std::string>());
    r.feed = j.at("feed").get<std::vector<std::string>>();
    r.trial = j.value("trial", 0);
    r.created_at = j.value("created_at", std::int64_t{0});
    if (!sessions.emplace(sid, std::move(r)).second)
      throw Error(ErrorCode::CorruptLog, "session '" + sid + "' created twice");
    return;
  }
  auto it = sessions.find(sid);
  if (it == sessions.end())
    throw Error(ErrorCode::CorruptLog, "record for unknown session '" + sid + "'");
  auto& r = it->second;
  if (type == "stage") {
    r.stage = parse_stage(j.at("stage").get<std::string>());
  } else if (type == "questionnaire") {
    r.profile = j.at("profile").get<UserProfile>();
    const auto att = j.at("attention");
    r.attention = std::make_pair(att.at(0).get<std::string>(), att.at(1).get<std::string>());
    r.attention_passed = j.at("passed").get<bool>();
  } else if (type == "interventions") {
    for (const auto& item : j.at("items")) {
      auto t = item.get<InterventionText>();
      r.interventions.insert_or_assign(t.claim_id, std::move(t));
    }
  } else {
    throw Error(ErrorCode::CorruptLog, "unknown session record type '" + type + "'");
  }
}

/// In-memory snapshot of an experiment's logs.
struct LogSnapshot {
  std::map<std::string, SessionRecord> sessions;
  std::vector<InteractionEvent> events;  // file order
};

class EventStore {
 public:
  static constexpr const char* kEventsFile = "events.jsonl";
  static constexpr const char* kSessionsFile = "sessions.jsonl";

  explicit EventStore(std::filesystem::path dir, int fsync_every = 1)
      : dir_(std::move(dir)), fsync_every_(std::max(1, fsync_every)) {
    std::filesystem::create_directories(dir_);
  }

  /// Reads the logs, drops torn final lines, and opens them for appending.
  LogSnapshot recover() {
    LogSnapshot snap = replay(dir_);
    truncate_torn_tail(dir_ / kEventsFile);
    truncate_torn_tail(dir_ / kSessionsFile);
    std::lock_guard lock(mutex_);
    events_ = detail::AppendFile(dir_ / kEventsFile);
    sessions_ = detail::AppendFile(dir_ / kSessionsFile);
    open_ = true;
    return snap;
  }

  static LogSnapshot replay(const std::filesystem::path& dir) {
    LogSnapshot snap;
    detail::read_lines(dir / kSessionsFile,
                       [&](const json& j) { apply_session_line(snap.sessions, j); });
    detail::read_lines(dir / kEventsFile, [&](const json& j) {
      auto e = j.get<InteractionEvent>();
      if (!snap.sessions.contains(e.session_id))
        throw Error(ErrorCode::CorruptLog, "event for unknown session '" + e.session_id + "'");
      snap.events.push_back(std::move(e));
    });
    return snap;
  }

  void append_event(const InteractionEvent& e) { append(events_, json(e).dump(), event_count_); }
  void append_session(const json& record) { append(sessions_, record.dump(), session_count_); }

  void sync() {
    std::lock_guard lock(mutex_);
    events_.sync();
    sessions_.sync();
  }

  const std::filesystem::path& dir() const { return dir_; }

  /// Cuts `path` back to the end of its last complete line.
  static void truncate_torn_tail(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return;
    const auto keep = detail::read_lines(path, [](const json&) {});
    if (keep != std::filesystem::file_size(path)) std::filesystem::resize_file(path, keep);
  }

  /// Drops everything from the first unparsable line onward.
  static std::uintmax_t repair(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return 0;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    while (pos < content.size()) {
      const auto nl = content.find('\n', pos);
      if (nl == std::string::npos) break;
      if (!json::accept(content.substr(pos, nl - pos))) break;
      pos = nl + 1;
    }
    in.close();
    const auto dropped = content.size() - pos;
    if (dropped) std::filesystem::resize_file(path, pos);
    return dropped;
  }

 private:
  void append(detail::AppendFile& file, const std::string& line, std::int64_t& counter) {
    std::lock_guard lock(mutex_);
    if (!open_) throw Error(ErrorCode::CorruptLog, "event store used before recover()");
    file.write_line(line);
    if (++counter % fsync_every_ == 0) file.sync();
  }

  std::filesystem::path dir_;
  int fsync_every_;
  std::mutex mutex_;
  bool open_ = false;
  detail::AppendFile events_;
  detail::AppendFile sessions_;
  std::int64_t event_count_ = 0;
  std::int64_t session_count_ = 0;
};

}  // namespace misinfo
