#include "urbanlens/service.hpp"

#include "urbanlens/error.hpp"

#include <httplib.h>

#include <cstdio>

namespace ul::service {

using nlohmann::json;

std::pair<int, json> error_envelope(std::exception_ptr error)
{
    try {
        std::rethrow_exception(error);
    } catch (const Error& e) {
        return {http_status(e.code()),
                json{{"code", api_code_name(e.code())}, {"error", e.kind()}, {"message", e.what()}, {"detail", e.detail()}}};
    } catch (const json::exception& e) {
        return {400, json{{"code", "bad_request"}, {"error", "MalformedRequest"}, {"message", e.what()}, {"detail", ""}}};
    } catch (const std::exception& e) {
        return {500, json{{"code", "internal"}, {"error", "Internal"}, {"message", e.what()}, {"detail", ""}}};
    } catch (...) {
        return {500, json{{"code", "internal"}, {"error", "Internal"}, {"message", "unknown failure"}, {"detail", ""}}};
    }
}

JobQueue::JobQueue(Store& store) : store_(store), worker_([this] { run(); }) {}

JobQueue::~JobQueue()
{
    {
        std::lock_guard lock(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
}

json JobQueue::describe(const Job& job)
{
    json out{{"id", job.id}, {"name", job.request.name}, {"status", job.status}, {"request", job.request.to_json()}};
    if (!job.result.is_null()) {
        out["result"] = job.result;
    }
    if (!job.error.is_null()) {
        out["error"] = job.error;
    }
    return out;
}

json JobQueue::submit(TrainRequest request)
{
    std::lock_guard lock(mu_);
    for (const auto& [id, job] : jobs_) {
        if (job.request.name == request.name && (job.status == "queued" || job.status == "running")) {
            fail("TrainingInProgress", ApiCode::conflict, "a job named '" + request.name + "' is already " + job.status);
        }
    }
    char id[32];
    std::snprintf(id, sizeof id, "job-%06llu", static_cast<unsigned long long>(next_id_++));
    Job job{id, std::move(request), "queued", nullptr, nullptr};
    json out = describe(job);
    jobs_.emplace(job.id, std::move(job));
    pending_.push_back(id);
    cv_.notify_all();
    return out;
}

std::optional<json> JobQueue::job(const std::string& id) const
{
    std::lock_guard lock(mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) {
        return std::nullopt;
    }
    return describe(it->second);
}

void JobQueue::wait_idle()
{
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [this] { return pending_.empty() && !busy_; });
}

void JobQueue::run()
{
    std::unique_lock lock(mu_);
    for (;;) {
        cv_.wait(lock, [this] { return stop_ || !pending_.empty(); });
        if (stop_) {
            return;
        }
        const std::string id = pending_.front();
        pending_.pop_front();
        busy_ = true;
        Job& job = jobs_.at(id);
        job.status = "running";
        const TrainRequest request = job.request;
        lock.unlock();

        json result, error;
        try {
            result = train(store_, request);
        } catch (...) {
            error = error_envelope(std::current_exception()).second;
        }

        lock.lock();
        Job& done = jobs_.at(id);
        done.status = error.is_null() ? "succeeded" : "failed";
        done.result = std::move(result);
        done.error = std::move(error);
        busy_ = false;
        idle_cv_.notify_all();
    }
}

struct Server::Impl {
    httplib::Server http;
};

namespace {

Params query_params(const httplib::Request& req)
{
    Params p = json::object();
    for (const auto& [key, value] : req.params) {
        if (!p.contains(key)) {
            p[key] = value;
        }
    }
    return p;
}

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(render(body), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F&& fn)
{
    return [fn = std::forward<F>(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (...) {
            auto [status, body] = error_envelope(std::current_exception());
            send_json(res, status, body);
        }
    };
}

json parse_body(const httplib::Request& req)
{
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        fail("MalformedRequest", ApiCode::bad_request, std::string("request body is not JSON: ") + e.what());
    }
}

} // namespace

Server::Server(Store& store) : store_(store), jobs_(store), impl_(std::make_unique<Impl>())
{
    auto& http = impl_->http;
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    http.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    for (const char* endpoint : {"datasets", "regions", "rank", "insights", "spatial/global", "spatial/lisa"}) {
        const std::string ep = endpoint;
        http.Get("/" + ep, guarded([this, ep](const httplib::Request& req, httplib::Response& res) {
                     send_json(res, 200, query(*store_.snapshot(), ep, query_params(req)));
                 }));
    }
    http.Get("/risk/models", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, query(*store_.snapshot(), "models", query_params(req)));
             }));
    http.Get("/spec", guarded([](const httplib::Request&, httplib::Response& res) { send_json(res, 200, openapi()); }));

    http.Post("/datasets", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  if (!req.is_multipart_form_data()) {
                      fail("MalformedRequest", ApiCode::bad_request, "expected multipart/form-data");
                  }
                  if (!req.has_file("manifest") || !req.has_file("csv")) {
                      fail("MalformedRequest", ApiCode::bad_request, "multipart body needs 'manifest' and 'csv' parts");
                  }
                  std::optional<std::string> geojson;
                  if (req.has_file("geojson")) {
                      geojson = req.get_file_value("geojson").content;
                  }
                  const auto summary = store_.ingest(req.get_file_value("manifest").content,
                                                     req.get_file_value("csv").content,
                                                     geojson ? std::optional<std::string_view>(*geojson) : std::nullopt);
                  send_json(res, 201, summary);
              }));
    http.Post("/regions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 201, store_.register_regions(req.body));
              }));
    http.Post("/risk/train", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto request = TrainRequest::from_json(parse_body(req));
                  check_train_inputs(*store_.snapshot(), request);
                  send_json(res, 202, jobs_.submit(std::move(request)));
              }));
    http.Get(R"(/risk/jobs/([A-Za-z0-9_-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 auto job = jobs_.job(id);
                 if (!job) {
                     fail("UnknownJob", ApiCode::not_found, "no job '" + id + "'");
                 }
                 send_json(res, 200, *job);
             }));
    http.Post("/risk/predict", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 200, predict(*store_.snapshot(), parse_body(req)));
              }));

    http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.body.empty() && res.status == 404) {
            send_json(res, 404,
                      json{{"code", "not_found"}, {"error", "NotFound"}, {"message", "no route for " + req.path}, {"detail", ""}});
        }
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        auto [status, body] = error_envelope(ep);
        send_json(res, status, body);
    });
}

Server::~Server()
{
    stop();
}

int Server::bind(const std::string& host, int port)
{
    const int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        fail("BindFailed", ApiCode::internal, "cannot listen on " + host + ":" + std::to_string(port));
    }
    return bound;
}

void Server::listen()
{
    impl_->http.listen_after_bind();
}

int Server::start(const std::string& host, int port)
{
    const int bound = bind(host, port);
    thread_ = std::thread([this] { listen(); });
    impl_->http.wait_until_ready();
    return bound;
}

void Server::stop()
{
    impl_->http.stop();
    if (thread_.joinable()) {
        thread_.join();
    }
}

} // namespace ul::service
