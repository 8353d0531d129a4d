/*  Copyright 2026 The promptforge authors.

    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License. */

#include "promptforge/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "promptforge/errors.hpp"

namespace fs = std::filesystem;

namespace promptforge {

nlohmann::ordered_json CollectionStats::to_json() const {
  nlohmann::ordered_json j;
  j["total_prompts"] = total_prompts;
  j["total_datasets"] = total_datasets;
  j["average"] = average;
  j["prompts_per_dataset"] = prompts_per_dataset;
  return j;
}

namespace {

void check_component(std::string_view c, std::string_view key) {
  const bool bad = c.empty() || c.front() == '.' ||
                   c.find_first_of(std::string_view("/\\\0", 3)) != std::string_view::npos;
  if (bad) throw ValidationError("invalid dataset key '" + std::string(key) + "'");
}

std::string errno_text() { return std::strerror(errno); }

class FileLock {
 public:
  explicit FileLock(const fs::path& p) {
    fd_ = ::open(p.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file '" + p.string() + "': " + errno_text());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw IoError("cannot lock '" + p.string() + "': " + errno_text());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

void write_all(int fd, const char* data, std::size_t n, const fs::path& p) {
  while (n > 0) {
    const auto w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw IoError("write failed on '" + p.string() + "': " + errno_text());
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

std::string serialize(const std::vector<Template>& ts) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : ts) arr.push_back(template_to_json(t));
  return arr.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

}  // namespace

DatasetRef parse_dataset_key(std::string_view key) {
  const auto slash = key.find('/');
  DatasetRef d;
  d.name = std::string(key.substr(0, slash));
  check_component(d.name, key);
  if (slash != std::string_view::npos) {
    const auto rest = key.substr(slash + 1);
    check_component(rest, key);
    d.subset = std::string(rest);
  }
  return d;
}

void validate_template(const Template& t) {
  if (t.name.empty()) throw ValidationError("template name is empty");
  check_component(t.dataset.name, t.dataset.key());
  if (t.dataset.subset) check_component(*t.dataset.subset, t.dataset.key());
  try {
    (void)CompiledTemplate::compile(t);
  } catch (const LocatedError& e) {
    throw ValidationError(e.what(), e.kind(), e.loc());
  }
}

struct TemplateStore::Shared {
  std::mutex map_mutex;
  std::map<std::string, std::unique_ptr<std::mutex>> dataset_mutex;
  std::mutex journal_mutex;
  std::mutex hook_mutex;
  FaultHook hook;
  std::atomic<std::uint64_t> counter{0};

  std::mutex& for_dataset(const std::string& key) {
    std::lock_guard lk(map_mutex);
    auto& m = dataset_mutex[key];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }
  void fire(std::string_view stage) {
    FaultHook h;
    {
      std::lock_guard lk(hook_mutex);
      h = hook;
    }
    if (h) h(stage);
  }
};

TemplateStore::TemplateStore(fs::path root)
    : root_(std::move(root)), shared_(std::make_shared<Shared>()) {}

TemplateStore TemplateStore::from_env() {
  const char* env = std::getenv("PROMPTFORGE_STORE");
  return TemplateStore(env && *env ? fs::path(env) : fs::current_path());
}

fs::path TemplateStore::dataset_file(const DatasetRef& d) const {
  fs::path p = root_ / d.name;
  if (d.subset) p /= *d.subset;
  return p / "templates.json";
}

std::vector<DatasetRef> TemplateStore::datasets() const {
  std::vector<DatasetRef> out;
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) return out;
  auto visible_dirs = [](const fs::path& dir) {
    std::vector<fs::path> v;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (!name.empty() && name.front() != '.' && e.is_directory()) v.push_back(e.path());
    }
    return v;
  };
  try {
    for (const auto& dir : visible_dirs(root_)) {
      const auto name = dir.filename().string();
      if (fs::exists(dir / "templates.json")) out.push_back({name, std::nullopt});
      for (const auto& sub : visible_dirs(dir))
        if (fs::exists(sub / "templates.json")) out.push_back({name, sub.filename().string()});
    }
  } catch (const fs::filesystem_error& e) {
    throw IoError(e.what());
  }
  std::sort(out.begin(), out.end(),
            [](const DatasetRef& a, const DatasetRef& b) { return a.key() < b.key(); });
  return out;
}

std::vector<Template> TemplateStore::load(const DatasetRef& d) const {
  const auto file = dataset_file(d);
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    std::error_code ec;
    if (!fs::exists(file, ec)) return {};
    throw IoError("cannot open '" + file.string() + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt template file '" + file.string() + "': " + e.what());
  }
  if (!j.is_array()) throw IoError("template file '" + file.string() + "' is not an array");
  std::vector<Template> out;
  out.reserve(j.size());
  for (const auto& rec : j) {
    auto t = template_from_json(rec);
    if (t.dataset != d)
      throw ValidationError("template '" + t.id + "' in '" + file.string() +
                            "' belongs to dataset '" + t.dataset.key() + "'");
    out.push_back(std::move(t));
  }
  return out;
}

std::optional<Template> TemplateStore::find(const DatasetRef& d, std::string_view id) const {
  for (auto& t : load(d))
    if (t.id == id) return std::move(t);
  return std::nullopt;
}

void TemplateStore::set_fault_hook(FaultHook hook) {
  std::lock_guard lk(shared_->hook_mutex);
  shared_->hook = std::move(hook);
}

void TemplateStore::journal(const nlohmann::ordered_json& entry) const {
  std::lock_guard lk(shared_->journal_mutex);
  const auto path = root_ / "journal.jsonl";
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open journal '" + path.string() + "': " + errno_text());
  const std::string line = entry.dump() + "\n";
  try {
    write_all(fd, line.data(), line.size(), path);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

void TemplateStore::write_atomic(const fs::path& file, const std::string& content) const {
  const auto tmp = file.parent_path() /
                   (".templates.json.tmp-" + std::to_string(::getpid()) + "-" +
                    std::to_string(shared_->counter.fetch_add(1)));
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot create '" + tmp.string() + "': " + errno_text());
  try {
    const std::size_t half = content.size() / 2;
    write_all(fd, content.data(), half, tmp);
    shared_->fire("write");
    write_all(fd, content.data() + half, content.size() - half, tmp);
    if (::fsync(fd) != 0) throw IoError("fsync failed on '" + tmp.string() + "': " + errno_text());
    shared_->fire("fsync");
    ::close(fd);
    fd = -1;
    shared_->fire("rename");
    if (::rename(tmp.c_str(), file.c_str()) != 0)
      throw IoError("cannot replace '" + file.string() + "': " + errno_text());
  } catch (...) {
    if (fd >= 0) ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  const int dfd = ::open(file.parent_path().c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

template <class F>
std::string TemplateStore::modify(const DatasetRef& d, const char* op, F&& change) {
  const auto file = dataset_file(d);
  std::lock_guard in_process(shared_->for_dataset(d.key()));
  std::error_code ec;
  fs::create_directories(file.parent_path(), ec);
  if (ec) throw IoError("cannot create '" + file.parent_path().string() + "': " + ec.message());
  FileLock cross_process(file.parent_path() / ".templates.json.lock");

  auto templates = load(d);
  const auto [id, changed] = change(templates);
  if (!changed) return id;

  nlohmann::ordered_json entry{{"op", op}, {"dataset", d.key()}, {"id", id}, {"state", "begin"}};
  journal(entry);
  try {
    write_atomic(file, serialize(templates));
  } catch (...) {
    entry["state"] = "abort";
    try {
      journal(entry);
    } catch (...) {
    }
    throw;
  }
  entry["state"] = "commit";
  journal(entry);
  return id;
}

std::string TemplateStore::save(Template t) {
  validate_template(t);
  assign_id(t);
  return modify(t.dataset, "save", [&](std::vector<Template>& ts) {
    for (const auto& existing : ts) {
      if (existing.id != t.id) continue;
      if (existing == t) return std::pair{t.id, false};
      throw ConflictError("template id '" + t.id + "' already holds a different record");
    }
    ts.push_back(t);
    return std::pair{t.id, true};
  });
}

std::string TemplateStore::update(const DatasetRef& d, std::string_view old_id, Template t) {
  validate_template(t);
  if (t.dataset != d)
    throw ValidationError("template dataset '" + t.dataset.key() + "' does not match '" +
                          d.key() + "'");
  assign_id(t);
  return modify(d, "update", [&](std::vector<Template>& ts) {
    auto it = std::find_if(ts.begin(), ts.end(), [&](const Template& x) { return x.id == old_id; });
    if (it == ts.end()) throw NotFound("no template '" + std::string(old_id) + "' in " + d.key());
    for (const auto& other : ts)
      if (&other != &*it && other.id == t.id)
        throw ConflictError("template id '" + t.id + "' already holds a different record");
    if (*it == t) return std::pair{t.id, false};
    *it = t;
    return std::pair{t.id, true};
  });
}

void TemplateStore::remove(const DatasetRef& d, std::string_view id) {
  modify(d, "remove", [&](std::vector<Template>& ts) {
    auto it = std::find_if(ts.begin(), ts.end(), [&](const Template& x) { return x.id == id; });
    if (it == ts.end()) throw NotFound("no template '" + std::string(id) + "' in " + d.key());
    ts.erase(it);
    return std::pair{std::string(id), true};
  });
}

CollectionStats TemplateStore::stats() const {
  CollectionStats s;
  for (const auto& d : datasets()) {
    const auto n = load(d).size();
    s.prompts_per_dataset[d.key()] = n;
    s.total_prompts += n;
  }
  s.total_datasets = s.prompts_per_dataset.size();
  if (s.total_datasets > 0)
    s.average = static_cast<double>(s.total_prompts) / static_cast<double>(s.total_datasets);
  return s;
}

}  // namespace promptforge
