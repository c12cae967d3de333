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

#include "closs/wire.h"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <utility>

#include "absl/strings/str_cat.h"
#include "closs/status_macros.h"
#include "httplib.h"

namespace closs {
namespace wire {

Json PredictRequest(const std::vector<TokenId>& ids) {
  return {{"op", "predict"}, {"ids", ids}};
}

Json PredictBatchRequest(const std::vector<std::vector<TokenId>>& batch) {
  return {{"op", "predict_batch"}, {"batch", batch}};
}

Json SaliencyRequest(const std::vector<TokenId>& ids) {
  return {{"op", "saliency"}, {"ids", ids}};
}

Json ProposeRequest(const std::vector<TokenId>& ids, int target, std::size_t k,
                    ProposalMode mode) {
  Json req = {{"op", "propose"}, {"ids", ids}, {"target", target}, {"k", k}};
  if (mode != ProposalMode::kTrajectory) req["mode"] = ProposalModeName(mode);
  return req;
}

Json PerplexityRequest(const std::vector<TokenId>& ids) {
  return {{"op", "ppl"}, {"ids", ids}};
}

Json ErrorResponse(std::string_view message) {
  return {{"ok", false}, {"error", std::string(message)}};
}

}  // namespace wire

namespace {

using wire::Json;

absl::StatusOr<std::vector<TokenId>> ParseIds(const Json& value,
                                              std::string_view field) {
  if (!value.is_array()) {
    return absl::InvalidArgumentError(absl::StrCat("\"", std::string(field), "\" must be an array"));
  }
  std::vector<TokenId> ids;
  ids.reserve(value.size());
  for (const Json& v : value) {
    if (!v.is_number_integer()) {
      return absl::InvalidArgumentError(
          absl::StrCat("\"", std::string(field), "\" must contain integers"));
    }
    const auto id = v.get<long long>();
    if (id < 0 || id > INT32_MAX) {
      return absl::OutOfRangeError(absl::StrCat("token id ", id, " out of range"));
    }
    ids.push_back(static_cast<TokenId>(id));
  }
  if (ids.empty()) return absl::InvalidArgumentError("empty input");
  return ids;
}

absl::StatusOr<std::vector<TokenId>> FieldIds(const Json& request,
                                              std::string_view field) {
  auto it = request.find(field);
  if (it == request.end()) {
    return absl::InvalidArgumentError(absl::StrCat("missing \"", std::string(field), "\""));
  }
  return ParseIds(*it, field);
}

absl::StatusOr<double> ParseProbability(const Json& v) {
  if (!v.is_number()) return absl::InternalError("score is not a number");
  const double p = v.get<double>();
  if (!(p > 0.0 && p < 1.0)) {
    return absl::InternalError(absl::StrCat("score ", p, " outside (0, 1)"));
  }
  return p;
}

}  // namespace

absl::StatusOr<Json> WireServer::Dispatch(const Json& request) {
  if (!request.is_object()) return absl::InvalidArgumentError("request must be an object");
  auto op_it = request.find("op");
  if (op_it == request.end() || !op_it->is_string()) {
    return absl::InvalidArgumentError("missing \"op\"");
  }
  const std::string op = op_it->get<std::string>();
  if (op == "predict") {
    ASSIGN_OR_RETURN(std::vector<TokenId> ids, FieldIds(request, "ids"));
    ASSIGN_OR_RETURN(ClassScore score, backend_.Predict(ids));
    return Json{{"ok", true}, {"p1", score.p1}};
  }
  if (op == "predict_batch") {
    auto it = request.find("batch");
    if (it == request.end() || !it->is_array()) {
      return absl::InvalidArgumentError("\"batch\" must be an array");
    }
    std::vector<std::vector<TokenId>> batch;
    batch.reserve(it->size());
    for (const Json& item : *it) {
      ASSIGN_OR_RETURN(std::vector<TokenId> ids, ParseIds(item, "batch"));
      batch.push_back(std::move(ids));
    }
    ASSIGN_OR_RETURN(std::vector<ClassScore> scores, backend_.PredictBatch(batch));
    Json p1s = Json::array();
    for (const ClassScore& s : scores) p1s.push_back(s.p1);
    return Json{{"ok", true}, {"p1s", std::move(p1s)}};
  }
  if (op == "saliency") {
    ASSIGN_OR_RETURN(std::vector<TokenId> ids, FieldIds(request, "ids"));
    ASSIGN_OR_RETURN(SaliencyVector scores, backend_.Saliency(ids));
    return Json{{"ok", true}, {"scores", scores}};
  }
  if (op == "propose") {
    ASSIGN_OR_RETURN(std::vector<TokenId> ids, FieldIds(request, "ids"));
    auto target = request.find("target");
    auto k = request.find("k");
    if (target == request.end() || !target->is_number_integer() ||
        (target->get<long long>() != 0 && target->get<long long>() != 1)) {
      return absl::InvalidArgumentError("\"target\" must be 0 or 1");
    }
    if (k == request.end() || !k->is_number_integer() || k->get<long long>() < 1) {
      return absl::InvalidArgumentError("\"k\" must be a positive integer");
    }
    ProposalMode mode = ProposalMode::kTrajectory;
    if (auto m = request.find("mode"); m != request.end()) {
      if (!m->is_string()) return absl::InvalidArgumentError("\"mode\" must be a string");
      ASSIGN_OR_RETURN(mode, ParseProposalMode(m->get<std::string>()));
    }
    ASSIGN_OR_RETURN(CandidateProposal proposal,
                     backend_.ProposeCandidates(ids, target->get<int>(),
                                                k->get<std::size_t>(), mode));
    return Json{{"ok", true}, {"candidates", proposal.per_position}};
  }
  if (op == "ppl") {
    if (!perplexity_) return absl::UnimplementedError("unsupported capability: ppl");
    ASSIGN_OR_RETURN(std::vector<TokenId> ids, FieldIds(request, "ids"));
    ASSIGN_OR_RETURN(double ppl, perplexity_(ids));
    return Json{{"ok", true}, {"ppl", ppl}};
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown op \"", op, "\""));
}

Json WireServer::Handle(const Json& request) {
  auto response = Dispatch(request);
  if (!response.ok()) return wire::ErrorResponse(std::string(response.status().message()));
  return *std::move(response);
}

std::string WireServer::HandleLine(const std::string& line) {
  Json request = Json::parse(line, nullptr, false);
  if (request.is_discarded()) return wire::ErrorResponse("malformed JSON").dump();
  return Handle(request).dump();
}

void WireServer::ServeStream(std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << HandleLine(line) << '\n';
    out.flush();
  }
}

absl::Status WireServer::ServeHttp(const std::string& host, int port,
                                   const std::string& path,
                                   std::function<void(int)> on_bound) {
  httplib::Server server;
  server.Post(path, [this](const httplib::Request& req, httplib::Response& res) {
    res.set_content(HandleLine(req.body), "application/json");
  });
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
  } else if (!server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    return absl::UnavailableError(absl::StrCat("cannot bind ", host, ":", port));
  }
  {
    std::lock_guard<std::mutex> lock(http_mu_);
    stop_http_ = [&server] {
      server.wait_until_ready();
      server.stop();
    };
  }
  if (on_bound) on_bound(bound);
  const bool ok = server.listen_after_bind();
  {
    std::lock_guard<std::mutex> lock(http_mu_);
    stop_http_ = nullptr;
  }
  return ok ? absl::OkStatus() : absl::UnavailableError("HTTP server failed");
}

void WireServer::Stop() {
  std::lock_guard<std::mutex> lock(http_mu_);
  if (stop_http_) stop_http_();
}

namespace {

class FdLineTransport : public Transport {
 public:
  FdLineTransport(int read_fd, int write_fd, pid_t child)
      : in_(fdopen(read_fd, "r")), out_(fdopen(write_fd, "w")), child_(child) {}

  ~FdLineTransport() override {
    if (out_ != nullptr) std::fclose(out_);
    if (in_ != nullptr) std::fclose(in_);
    if (child_ > 0) {
      int status = 0;
      waitpid(child_, &status, 0);
    }
  }

  absl::StatusOr<std::string> RoundTrip(const std::string& line) override {
    if (in_ == nullptr || out_ == nullptr) {
      return absl::UnavailableError("transport is closed");
    }
    if (std::fputs(line.c_str(), out_) < 0 || std::fputc('\n', out_) == EOF ||
        std::fflush(out_) != 0) {
      return absl::UnavailableError("backend unavailable: write failed");
    }
    std::string response;
    int c;
    while ((c = std::fgetc(in_)) != EOF && c != '\n') {
      response.push_back(static_cast<char>(c));
    }
    if (c == EOF && response.empty()) {
      return absl::UnavailableError("backend unavailable: connection closed");
    }
    return response;
  }

 private:
  std::FILE* in_;
  std::FILE* out_;
  pid_t child_;
};

class HttpLineTransport : public Transport {
 public:
  HttpLineTransport(const std::string& origin, std::string path)
      : client_(origin), path_(std::move(path)) {
    client_.set_connection_timeout(5, 0);
    client_.set_read_timeout(600, 0);
    client_.set_keep_alive(true);
  }

  absl::StatusOr<std::string> RoundTrip(const std::string& line) override {
    auto res = client_.Post(path_, line, "application/json");
    if (!res) {
      return absl::UnavailableError(absl::StrCat(
          "backend unavailable: ", httplib::to_string(res.error())));
    }
    if (res->status != 200) {
      return absl::UnavailableError(absl::StrCat("backend HTTP status ", res->status));
    }
    return res->body;
  }

 private:
  httplib::Client client_;
  std::string path_;
};

}  // namespace

absl::StatusOr<std::unique_ptr<Transport>> SpawnProcessTransport(
    const std::string& command) {
  // A dead child must surface as a write error, not kill the client.
  signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0) {
    return absl::UnavailableError(absl::StrCat("pipe: ", std::strerror(errno)));
  }
  if (pipe(from_child) != 0) {
    close(to_child[0]);
    close(to_child[1]);
    return absl::UnavailableError(absl::StrCat("pipe: ", std::strerror(errno)));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) close(fd);
    return absl::UnavailableError(absl::StrCat("fork: ", std::strerror(errno)));
  }
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) close(fd);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  return std::make_unique<FdLineTransport>(from_child[0], to_child[1], pid);
}

std::unique_ptr<Transport> FdTransport(int read_fd, int write_fd) {
  signal(SIGPIPE, SIG_IGN);
  return std::make_unique<FdLineTransport>(read_fd, write_fd, -1);
}

absl::StatusOr<std::unique_ptr<Transport>> HttpTransport(const std::string& url) {
  constexpr std::string_view kScheme = "http://";
  if (url.rfind(kScheme, 0) != 0) {
    return absl::InvalidArgumentError(absl::StrCat("not an http URL: ", url));
  }
  const std::size_t slash = url.find('/', kScheme.size());
  std::string origin = url.substr(0, slash);
  std::string path = slash == std::string::npos ? "/rpc" : url.substr(slash);
  if (origin.size() == kScheme.size()) {
    return absl::InvalidArgumentError(absl::StrCat("missing host in ", url));
  }
  return std::make_unique<HttpLineTransport>(origin, path);
}

absl::StatusOr<Json> WireClientBackend::Call(const Json& request) {
  std::string line;
  {
    std::lock_guard<std::mutex> lock(mu_);
    ASSIGN_OR_RETURN(line, transport_->RoundTrip(request.dump()));
  }
  Json response = Json::parse(line, nullptr, false);
  if (response.is_discarded() || !response.is_object()) {
    return absl::DataLossError("malformed response from backend");
  }
  auto ok = response.find("ok");
  if (ok == response.end() || !ok->is_boolean()) {
    return absl::DataLossError("response lacks \"ok\"");
  }
  if (!ok->get<bool>()) {
    auto err = response.find("error");
    return absl::InternalError(absl::StrCat(
        "backend error: ",
        err != response.end() && err->is_string() ? err->get<std::string>()
                                                  : std::string("unknown")));
  }
  return response;
}

absl::StatusOr<std::vector<ClassScore>> WireClientBackend::DoPredictBatch(
    const std::vector<std::vector<TokenId>>& batch) {
  std::vector<ClassScore> scores;
  if (batch.size() == 1) {
    ASSIGN_OR_RETURN(Json res, Call(wire::PredictRequest(batch.front())));
    auto p1 = res.find("p1");
    if (p1 == res.end()) return absl::DataLossError("response lacks \"p1\"");
    ASSIGN_OR_RETURN(double p, ParseProbability(*p1));
    scores.push_back({p});
    return scores;
  }
  ASSIGN_OR_RETURN(Json res, Call(wire::PredictBatchRequest(batch)));
  auto p1s = res.find("p1s");
  if (p1s == res.end() || !p1s->is_array() || p1s->size() != batch.size()) {
    return absl::DataLossError("response \"p1s\" does not match the batch");
  }
  scores.reserve(batch.size());
  for (const Json& v : *p1s) {
    ASSIGN_OR_RETURN(double p, ParseProbability(v));
    scores.push_back({p});
  }
  return scores;
}

absl::StatusOr<SaliencyVector> WireClientBackend::DoSaliency(
    const std::vector<TokenId>& ids) {
  ASSIGN_OR_RETURN(Json res, Call(wire::SaliencyRequest(ids)));
  auto scores = res.find("scores");
  if (scores == res.end() || !scores->is_array()) {
    return absl::DataLossError("response lacks \"scores\"");
  }
  SaliencyVector out;
  for (const Json& v : *scores) {
    if (!v.is_number()) return absl::DataLossError("non-numeric saliency");
    out.push_back(v.get<double>());
  }
  return out;
}

absl::StatusOr<CandidateProposal> WireClientBackend::DoProposeCandidates(
    const std::vector<TokenId>& ids, int target, std::size_t k,
    ProposalMode mode) {
  ASSIGN_OR_RETURN(Json res, Call(wire::ProposeRequest(ids, target, k, mode)));
  auto candidates = res.find("candidates");
  if (candidates == res.end() || !candidates->is_array()) {
    return absl::DataLossError("response lacks \"candidates\"");
  }
  CandidateProposal proposal;
  for (const Json& list : *candidates) {
    if (!list.is_array()) return absl::DataLossError("candidate list is not an array");
    std::vector<TokenId> tokens;
    for (const Json& v : list) {
      if (!v.is_number_integer()) return absl::DataLossError("non-integer candidate");
      tokens.push_back(v.get<TokenId>());
    }
    proposal.per_position.push_back(std::move(tokens));
  }
  return proposal;
}

absl::StatusOr<double> WireClientBackend::Perplexity(const std::vector<TokenId>& ids) {
  ASSIGN_OR_RETURN(Json res, Call(wire::PerplexityRequest(ids)));
  auto ppl = res.find("ppl");
  if (ppl == res.end() || !ppl->is_number()) {
    return absl::DataLossError("response lacks \"ppl\"");
  }
  return ppl->get<double>();
}

}  // namespace closs
