#pragma once

#include "urbanlens/analytics.hpp"
#include "urbanlens/store.hpp"

#include <json.hpp>

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace ul::service {

// Training jobs run one at a time on a worker thread. A second job with the
// name of a queued or running one is refused with TrainingInProgress.
class JobQueue {
public:
    explicit JobQueue(Store& store);
    ~JobQueue();
    JobQueue(const JobQueue&) = delete;
    JobQueue& operator=(const JobQueue&) = delete;

    nlohmann::json submit(TrainRequest request);
    std::optional<nlohmann::json> job(const std::string& id) const;
    void wait_idle();

private:
    struct Job {
        std::string id;
        TrainRequest request;
        std::string status; // queued, running, succeeded, failed
        nlohmann::json result;
        nlohmann::json error;
    };

    void run();
    static nlohmann::json describe(const Job& job);

    Store& store_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::map<std::string, Job> jobs_;
    std::deque<std::string> pending_;
    std::uint64_t next_id_ = 1;
    bool busy_ = false;
    bool stop_ = false;
    std::thread worker_;
};

// HTTP/1.1 JSON API over a store. Errors use {code, message, detail}.
class Server {
public:
    explicit Server(Store& store);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds (port 0 picks a free port) and returns the bound port.
    int bind(const std::string& host, int port);
    // Serves until stop(); blocking.
    void listen();
    // bind + listen on a background thread; returns the bound port.
    int start(const std::string& host, int port);
    void stop();

    JobQueue& jobs() { return jobs_; }

private:
    struct Impl;
    Store& store_;
    JobQueue jobs_;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

// Envelope for an exception escaping a handler: HTTP status and body.
std::pair<int, nlohmann::json> error_envelope(std::exception_ptr error);

} // namespace ul::service
