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

#pragma once

#include <memory>
#include <string>

#include "promptforge/pipeline.hpp"

namespace promptforge {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 binds any free port
  unsigned job_workers = 2;  // background jobs running at once
  std::size_t max_page = 1000;
};

/// JSON-over-HTTP API for the template store, previews, and pipeline jobs.
///
///   GET  /datasets
///   GET  /datasets/{key}/examples?split=&offset=&limit=   (limit defaults to 20)
///   GET  /datasets/{key}/templates[/{id}]
///   PUT  /datasets/{key}/templates[/{id}]
///   DELETE /datasets/{key}/templates/{id}
///   POST /preview
///   POST /ingest, /mixture/sample, /pack                 (synchronous)
///   POST /materialize, /eval, /scan                      (202 with a job id)
///   GET  /jobs/{id}, /jobs/{id}/result
///   GET  /stats
///
/// Errors come back as {"error": {kind, message, ...}} with 400, 404, 409,
/// 500, or 502.
class Service {
 public:
  explicit Service(Workspace ws, ServiceConfig cfg = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the socket; returns the port. Throws IoError.
  int bind();
  /// Serves on a background thread (binding first if needed).
  void start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace promptforge
