#pragma once

#include "enrichkit/config.hpp"
#include "enrichkit/error.hpp"
#include "enrichkit/record.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace enrichkit {

struct HttpReply {
    int status = 200;
    nlohmann::json body;
};

// HTTP status for an error code (400, 404, 409, 422 or 502).
int http_status_for(Errc code);
nlohmann::json error_body(const Error& e);

// JSON API over a Runtime. `handle` is transport-free so it can be exercised
// directly; `serve` binds it to an HTTP listener.
class WorkbenchService {
public:
    WorkbenchService(Runtime& runtime, std::vector<InstructionRecord> records);

    HttpReply handle(const std::string& method, const std::string& path, const std::string& body,
                     const std::map<std::string, std::string>& query = {});

    // Blocks until stop() is called. `on_ready` receives the bound port.
    void serve(const std::string& host, int port, const std::function<void(int)>& on_ready = {});
    void stop();

    HttpReply list_tasks();
    HttpReply sample(const std::string& task, const nlohmann::json& req);
    HttpReply generate_format(const nlohmann::json& req);
    HttpReply put_format(const std::string& task, const nlohmann::json& req);
    HttpReply get_format(const std::string& task, const std::map<std::string, std::string>& query);
    HttpReply run_pipeline(const nlohmann::json& req);
    HttpReply quality_report();
    HttpReply run_eval(const nlohmann::json& req);

private:
    const InstructionRecord* find_record(const std::string& id) const;
    std::vector<InstructionRecord> task_records(const std::string& task) const;

    Runtime& rt_;
    std::vector<InstructionRecord> records_;
    std::map<std::string, std::size_t> by_id_;
    struct Server;
    std::shared_ptr<Server> server_;
};

} // namespace enrichkit
