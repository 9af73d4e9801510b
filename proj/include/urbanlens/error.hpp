#pragma once

#include <stdexcept>
#include <string>

namespace ul {

// Transport-level classification shared by the HTTP service, the C API and
// the CLI. Every domain error maps onto exactly one of these.
enum class ApiCode { bad_request, not_found, conflict, unprocessable, internal };

const char* api_code_name(ApiCode code) noexcept;
int http_status(ApiCode code) noexcept;

// Domain error carrying the module's error name (e.g. "MissingColumn").
class Error : public std::runtime_error {
public:
    Error(std::string kind, ApiCode code, const std::string& message, std::string detail = {})
        : std::runtime_error(message), kind_(std::move(kind)), code_(code), detail_(std::move(detail))
    {
    }

    const std::string& kind() const noexcept { return kind_; }
    ApiCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string kind_;
    ApiCode code_;
    std::string detail_;
};

[[noreturn]] inline void fail(std::string kind, ApiCode code, const std::string& message, std::string detail = {})
{
    throw Error(std::move(kind), code, message, std::move(detail));
}

// Warnings that do not abort an operation (degenerate bins, all-safe ADASYN,
// skipped constant fields) go through a process-wide sink. The default sink
// writes to stderr; tests and the C API install their own.
using WarningSink = void (*)(const std::string& message);
void set_warning_sink(WarningSink sink) noexcept;
void warn(const std::string& message);

} // namespace ul
