// Copyright 2026 The CLOSS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CLOSS_WIRE_H_
#define CLOSS_WIRE_H_

#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "closs/gateway.h"
#include "json.hpp"

namespace closs {

// Newline-delimited JSON protocol, one response per request, in order:
//
//   {"op":"predict","ids":[...]}                   -> {"ok":true,"p1":x}
//   {"op":"predict_batch","batch":[[...],...]}     -> {"ok":true,"p1s":[...]}
//   {"op":"saliency","ids":[...]}                  -> {"ok":true,"scores":[...]}
//   {"op":"propose","ids":[...],"target":t,"k":K}  -> {"ok":true,"candidates":[[...],...]}
//   {"op":"ppl","ids":[...]}                       -> {"ok":true,"ppl":x}
//
// Failures answer {"ok":false,"error":"..."}. `propose` also accepts an
// optional "mode" ("trajectory", "original", "untrained-head") selecting
// the ablation variants. Doubles are written with 17 significant digits.
namespace wire {

using Json = nlohmann::json;

Json PredictRequest(const std::vector<TokenId>& ids);
Json PredictBatchRequest(const std::vector<std::vector<TokenId>>& batch);
Json SaliencyRequest(const std::vector<TokenId>& ids);
Json ProposeRequest(const std::vector<TokenId>& ids, int target, std::size_t k,
                    ProposalMode mode);
Json PerplexityRequest(const std::vector<TokenId>& ids);
Json ErrorResponse(std::string_view message);

}  // namespace wire

using PerplexityFn =
    std::function<absl::StatusOr<double>(const std::vector<TokenId>& ids)>;

// Answers protocol requests against a backend. Never throws; protocol
// violations become error responses.
class WireServer {
 public:
  explicit WireServer(ClassifierBackend& backend, PerplexityFn perplexity = nullptr)
      : backend_(backend), perplexity_(std::move(perplexity)) {}

  wire::Json Handle(const wire::Json& request);
  std::string HandleLine(const std::string& line);

  // Reads requests until EOF, writing and flushing one response each.
  void ServeStream(std::istream& in, std::ostream& out);

  // Blocks serving POST <path> until `Stop` is called from another thread.
  // `on_bound` receives the bound port (useful with port 0).
  absl::Status ServeHttp(const std::string& host, int port,
                         const std::string& path = "/rpc",
                         std::function<void(int)> on_bound = nullptr);
  void Stop();

 private:
  absl::StatusOr<wire::Json> Dispatch(const wire::Json& request);

  ClassifierBackend& backend_;
  PerplexityFn perplexity_;
  std::mutex http_mu_;
  std::function<void()> stop_http_;
};

// A request/response channel carrying one JSON line each way.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual absl::StatusOr<std::string> RoundTrip(const std::string& line) = 0;
};

// Spawns `/bin/sh -c command` and talks over its stdin/stdout.
absl::StatusOr<std::unique_ptr<Transport>> SpawnProcessTransport(
    const std::string& command);

// Talks over an already-open pair of file descriptors (takes ownership).
std::unique_ptr<Transport> FdTransport(int read_fd, int write_fd);

// POSTs each request to `url` (e.g. "http://127.0.0.1:8080/rpc").
absl::StatusOr<std::unique_ptr<Transport>> HttpTransport(const std::string& url);

// Gateway implementation over the wire protocol. Requests are serialized
// over the single transport.
class WireClientBackend : public ClassifierBackend {
 public:
  explicit WireClientBackend(std::unique_ptr<Transport> transport)
      : transport_(std::move(transport)) {}

  absl::StatusOr<double> Perplexity(const std::vector<TokenId>& ids);

 protected:
  absl::StatusOr<std::vector<ClassScore>> DoPredictBatch(
      const std::vector<std::vector<TokenId>>& batch) override;
  absl::StatusOr<SaliencyVector> DoSaliency(const std::vector<TokenId>& ids) override;
  absl::StatusOr<CandidateProposal> DoProposeCandidates(
      const std::vector<TokenId>& ids, int target, std::size_t k,
      ProposalMode mode) override;

 private:
  absl::StatusOr<wire::Json> Call(const wire::Json& request);

  std::mutex mu_;
  std::unique_ptr<Transport> transport_;
};

}  // namespace closs

#endif  // CLOSS_WIRE_H_
