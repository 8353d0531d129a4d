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

#include "promptforge/service.hpp"

#include <httplib.h>

#include <atomic>
#include <list>
#include <map>
#include <mutex>
#include <semaphore>
#include <thread>

#include "promptforge/errors.hpp"
#include "promptforge/value.hpp"

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace promptforge {

namespace {

int http_status(const std::exception& e) {
  if (dynamic_cast<const NotFound*>(&e)) return 404;
  if (dynamic_cast<const ConflictError*>(&e)) return 409;
  if (dynamic_cast<const IoError*>(&e)) return 500;
  if (dynamic_cast<const ScorerFailure*>(&e)) return 502;
  if (dynamic_cast<const Error*>(&e)) return 400;
  return 500;
}

void send_error(httplib::Response& res, const std::exception& e) {
  res.status = http_status(e);
  res.set_content(json_body({{"error", error_json(e)}}), "application/json");
}

void send_json(httplib::Response& res, const ojson& j, int status = 200) {
  res.status = status;
  res.set_content(json_body(j), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
  }
}

std::uint64_t query_uint(const httplib::Request& req, const char* key, std::uint64_t def) {
  if (!req.has_param(key)) return def;
  const auto s = req.get_param_value(key);
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos || s.size() > 18)
    throw ValidationError(std::string("query parameter '") + key + "' must be a non-negative integer");
  return std::stoull(s);
}

struct Job {
  std::string id;
  std::string kind;
  std::string status = "queued";  // queued, running, done, failed
  StepOutput output;
  ojson error;
};

}  // namespace

struct Service::Impl {
  Workspace ws;
  ServiceConfig cfg;
  httplib::Server server;
  int bound_port = -1;
  std::jthread listener;
  std::atomic<bool> stopped{false};

  std::mutex jobs_mutex;
  std::map<std::string, Job> jobs;
  std::list<std::jthread> job_threads;
  std::counting_semaphore<64> job_slots;
  std::uint64_t next_job = 1;

  Impl(Workspace w, ServiceConfig c)
      : ws(std::move(w)), cfg(c), job_slots(static_cast<std::ptrdiff_t>(std::clamp(c.job_workers, 1u, 64u))) {
    routes();
  }

  template <class F>
  auto guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const std::exception& e) {
        send_error(res, e);
      }
    };
  }

  std::string submit(const std::string& kind, std::function<StepOutput()> work) {
    std::lock_guard lk(jobs_mutex);
    const std::string id = "job-" + std::to_string(next_job++);
    Job job;
    job.id = id;
    job.kind = kind;
    jobs[id] = std::move(job);
    job_threads.emplace_back([this, id, work = std::move(work)] {
      job_slots.acquire();
      set_status(id, "running");
      StepOutput out;
      ojson err;
      try {
        out = work();
      } catch (const std::exception& e) {
        err = error_json(e);
      }
      job_slots.release();
      std::lock_guard lk2(jobs_mutex);
      auto& j = jobs[id];
      if (err.is_null()) {
        j.output = std::move(out);
        j.status = "done";
      } else {
        j.error = std::move(err);
        j.status = "failed";
      }
    });
    return id;
  }

  void set_status(const std::string& id, const char* status) {
    std::lock_guard lk(jobs_mutex);
    jobs[id].status = status;
  }

  ojson job_json(const Job& j) const {
    ojson o;
    o["id"] = j.id;
    o["kind"] = j.kind;
    o["status"] = j.status;
    if (j.status == "done") {
      o["notes"] = j.output.notes;
      if (j.output.content_type == "application/json") o["result"] = ojson::parse(j.output.body);
    }
    if (j.status == "failed") o["error"] = j.error;
    return o;
  }

  ojson dataset_json(const DatasetDescriptor& d) const {
    ojson e;
    e["dataset"] = d.ref().key();
    e["name"] = d.name;
    e["subset"] = d.subset ? json(*d.subset) : json(nullptr);
    auto splits = ojson::object();
    for (const auto& [name, info] : d.splits)
      splits[name] = {{"format", format_name(info.format)}, {"example_count", info.example_count}};
    e["splits"] = splits;
    e["templates"] = ws.store.load(d.ref()).size();
    return e;
  }

  Template template_for(const std::string& key, const httplib::Request& req) {
    const auto ref = parse_dataset_key(key);
    auto body = parse_body(req);
    if (!body.is_object()) throw ValidationError("template must be a JSON object");
    if (!body.contains("dataset")) body["dataset"] = {{"name", ref.name}, {"subset", ref.subset ? json(*ref.subset) : json(nullptr)}};
    auto t = template_from_json(body);
    t.dataset = parse_dataset_key(t.dataset.key());
    if (t.dataset != ref)
      throw ValidationError("template dataset '" + t.dataset.key() + "' does not match '" + key + "'");
    return t;
  }

  void async_route(const char* path, const char* kind,
                   StepOutput (*fn)(const Workspace&, const json&)) {
    server.Post(path, guarded([this, kind, fn](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      const auto id = submit(kind, [this, fn, body = std::move(body)] { return fn(ws, body); });
      send_json(res, {{"job_id", id}, {"status", "queued"}}, 202);
    }));
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, PUT, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/datasets", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto list = ojson::array();
      for (const auto& d : ws.registry) list.push_back(dataset_json(d));
      send_json(res, list);
    }));

    server.Get(R"(/datasets/(.+)/examples)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto key = req.matches[1].str();
      const auto& d = ws.dataset(key);
      const auto split = req.has_param("split") ? req.get_param_value("split") : std::string("train");
      const auto offset = query_uint(req, "offset", 0);
      const auto limit = query_uint(req, "limit", 20);
      if (limit == 0 || limit > cfg.max_page)
        throw ValidationError("limit must be between 1 and " + std::to_string(cfg.max_page));
      if (!d.splits.count(split)) throw NotFound("dataset '" + key + "' has no split '" + split + "'");
      ExampleReader reader(d, split);
      auto examples = ojson::array();
      std::uint64_t total = 0;
      while (auto ex = reader.next()) {
        if (total >= offset && total < offset + limit)
          examples.push_back({{"ordinal", ex->ordinal}, {"fields", to_json(ex->fields)}});
        ++total;
      }
      send_json(res, {{"dataset", key}, {"split", split}, {"offset", offset}, {"limit", limit},
                      {"total", total}, {"examples", examples}});
    }));

    server.Get(R"(/datasets/(.+)/templates)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto list = ojson::array();
      for (const auto& t : ws.store.load(parse_dataset_key(req.matches[1].str())))
        list.push_back(template_to_json(t));
      send_json(res, list);
    }));

    server.Get(R"(/datasets/(.+)/templates/([0-9a-f]{16}))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto key = req.matches[1].str(), id = req.matches[2].str();
      auto t = ws.store.find(parse_dataset_key(key), id);
      if (!t) throw NotFound("no template '" + id + "' in " + key);
      send_json(res, template_to_json(*t));
    }));

    server.Put(R"(/datasets/(.+)/templates)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = ws.store.save(template_for(req.matches[1].str(), req));
      send_json(res, {{"id", id}});
    }));

    server.Put(R"(/datasets/(.+)/templates/([0-9a-f]{16}))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto key = req.matches[1].str();
      const auto id = ws.store.update(parse_dataset_key(key), req.matches[2].str(), template_for(key, req));
      send_json(res, {{"id", id}});
    }));

    server.Delete(R"(/datasets/(.+)/templates/([0-9a-f]{16}))",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
      ws.store.remove(parse_dataset_key(req.matches[1].str()), req.matches[2].str());
      send_json(res, {{"deleted", req.matches[2].str()}});
    }));

    server.Post("/preview", guarded([this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(run_preview(ws, parse_body(req)).body, "application/json");
    }));

    auto sync = [this](const char* path, auto fn) {
      server.Post(path, guarded([this, fn](const httplib::Request& req, httplib::Response& res) {
        const auto out = fn(ws, parse_body(req));
        res.set_content(out.body, out.content_type);
      }));
    };
    sync("/ingest", [](const Workspace& w, const json& b) { return run_ingest(w, b); });
    sync("/mixture/sample", [](const Workspace& w, const json& b) { return run_mix(w, b); });
    sync("/pack", [](const Workspace&, const json& b) { return run_pack(b); });

    async_route("/materialize", "materialize", &run_materialize);
    async_route("/eval", "eval", &run_eval);
    async_route("/scan", "scan", +[](const Workspace&, const json& b) { return run_scan(b); });

    server.Get(R"(/jobs/([A-Za-z0-9-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lk(jobs_mutex);
      auto it = jobs.find(req.matches[1].str());
      if (it == jobs.end()) throw NotFound("unknown job '" + req.matches[1].str() + "'");
      send_json(res, job_json(it->second));
    }));

    server.Get(R"(/jobs/([A-Za-z0-9-]+)/result)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lk(jobs_mutex);
      auto it = jobs.find(req.matches[1].str());
      if (it == jobs.end()) throw NotFound("unknown job '" + req.matches[1].str() + "'");
      const auto& j = it->second;
      if (j.status == "failed") {
        send_json(res, {{"error", j.error}}, 400);
      } else if (j.status != "done") {
        send_json(res, {{"id", j.id}, {"status", j.status}}, 409);
      } else {
        res.set_content(j.output.body, j.output.content_type);
      }
    }));

    server.Get("/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
      res.set_content(run_stats(ws).body, "application/json");
    }));
  }
};

Service::Service(Workspace ws, ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(ws), cfg)) {}

Service::~Service() {
  stop();
  impl_->listener = {};
  std::list<std::jthread> running;
  {
    std::lock_guard lk(impl_->jobs_mutex);
    running.swap(impl_->job_threads);
  }
  running.clear();
}

int Service::bind() {
  if (impl_->bound_port > 0) return impl_->bound_port;
  const int port = impl_->cfg.port == 0 ? impl_->server.bind_to_any_port(impl_->cfg.host)
                                        : (impl_->server.bind_to_port(impl_->cfg.host, impl_->cfg.port)
                                               ? impl_->cfg.port
                                               : -1);
  if (port <= 0)
    throw IoError("cannot bind " + impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
  impl_->bound_port = port;
  return port;
}

void Service::start() {
  bind();
  impl_->listener = std::jthread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void Service::run() {
  bind();
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (!impl_->stopped.exchange(true)) impl_->server.stop();
}

int Service::port() const noexcept { return impl_->bound_port; }

}  // namespace promptforge
