#include "urbanlens/error.hpp"

#include <atomic>
#include <cstdio>

namespace ul {

const char* api_code_name(ApiCode code) noexcept
{
    switch (code) {
    case ApiCode::bad_request: return "bad_request";
    case ApiCode::not_found: return "not_found";
    case ApiCode::conflict: return "conflict";
    case ApiCode::unprocessable: return "unprocessable";
    case ApiCode::internal: return "internal";
    }
    return "internal";
}

int http_status(ApiCode code) noexcept
{
    switch (code) {
    case ApiCode::bad_request: return 400;
    case ApiCode::not_found: return 404;
    case ApiCode::conflict: return 409;
    case ApiCode::unprocessable: return 422;
    case ApiCode::internal: return 500;
    }
    return 500;
}

namespace {
void stderr_sink(const std::string& message)
{
    std::fprintf(stderr, "warning: %s\n", message.c_str());
}
std::atomic<WarningSink> g_sink{&stderr_sink};
} // namespace

void set_warning_sink(WarningSink sink) noexcept
{
    g_sink.store(sink ? sink : &stderr_sink);
}

void warn(const std::string& message)
{
    g_sink.load()(message);
}

} // namespace ul
