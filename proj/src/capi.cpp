#include "urbanlens/urbanlens.h"

#include "urbanlens/analytics.hpp"
#include "urbanlens/error.hpp"
#include "urbanlens/service.hpp"
#include "urbanlens/synth.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

struct ul_store {
    explicit ul_store(std::string dir) : store(std::move(dir)) {}
    ul::service::Store store;
};

namespace {

using nlohmann::json;

thread_local std::string g_error;
thread_local std::string g_kind;
thread_local std::string g_json = "{}";

char* dup(std::string_view s)
{
    auto* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) {
        std::memcpy(p, s.data(), s.size());
        p[s.size()] = '\0';
    }
    return p;
}

ul_status status_of(const std::string& code)
{
    if (code == "bad_request") return UL_BAD_REQUEST;
    if (code == "not_found") return UL_NOT_FOUND;
    if (code == "conflict") return UL_CONFLICT;
    if (code == "unprocessable") return UL_UNPROCESSABLE;
    return UL_INTERNAL;
}

ul_status record_error(std::exception_ptr ep)
{
    const auto [http, body] = ul::service::error_envelope(ep);
    (void)http;
    g_kind = body.value("error", "Internal");
    g_error = g_kind + ": " + body.value("message", "");
    g_json = body.dump();
    return status_of(body.value("code", "internal"));
}

ul_status invalid(const char* what)
{
    g_kind = "InvalidArgument";
    g_error = g_kind + ": " + what;
    g_json = json{{"code", "bad_request"}, {"error", g_kind}, {"message", what}, {"detail", ""}}.dump();
    return UL_INVALID_ARGUMENT;
}

template <typename F>
ul_status guard(F&& fn)
{
    try {
        fn();
        g_error.clear();
        g_kind.clear();
        g_json = "{}";
        return UL_OK;
    } catch (...) {
        return record_error(std::current_exception());
    }
}

json params_of(const char* text)
{
    if (!text || !*text) {
        return json::object();
    }
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        ul::fail("MalformedRequest", ul::ApiCode::bad_request, std::string("parameters are not JSON: ") + e.what());
    }
}

} // namespace

extern "C" {

void ul_free(char* text)
{
    std::free(text);
}

const char* ul_version(void)
{
    return "1.0.0";
}

const char* ul_last_error(void)
{
    return g_error.c_str();
}

const char* ul_last_error_kind(void)
{
    return g_kind.c_str();
}

const char* ul_last_error_json(void)
{
    return g_json.c_str();
}

int ul_http_status(ul_status status)
{
    switch (status) {
    case UL_OK: return 200;
    case UL_BAD_REQUEST:
    case UL_INVALID_ARGUMENT: return 400;
    case UL_NOT_FOUND: return 404;
    case UL_CONFLICT: return 409;
    case UL_UNPROCESSABLE: return 422;
    case UL_INTERNAL: return 500;
    }
    return 500;
}

void ul_set_warnings(int enabled)
{
    ul::set_warning_sink(enabled ? nullptr : +[](const std::string&) {});
}

ul_status ul_store_open(const char* directory, ul_store** out)
{
    if (!directory || !out) {
        return invalid("directory and out must be non-null");
    }
    *out = nullptr;
    return guard([&] { *out = new ul_store(directory); });
}

void ul_store_close(ul_store* store)
{
    delete store;
}

ul_status ul_generate(const char* directory, size_t regions, size_t days, uint64_t seed)
{
    if (!directory) {
        return invalid("directory must be non-null");
    }
    return guard([&] {
        ul::synth::CityOptions opt;
        opt.regions = regions;
        opt.days = days;
        opt.seed = seed;
        ul::synth::write_city(ul::synth::generate_city(opt), directory);
    });
}

ul_status ul_ingest(ul_store* store, const char* manifest_json, const char* csv, const char* geojson, char** out_json)
{
    if (!store || !manifest_json || !csv || !out_json) {
        return invalid("store, manifest, csv and out must be non-null");
    }
    *out_json = nullptr;
    return guard([&] {
        std::optional<std::string_view> geo;
        if (geojson) {
            geo = geojson;
        }
        *out_json = dup(ul::service::render(store->store.ingest(manifest_json, csv, geo)));
    });
}

ul_status ul_register_regions(ul_store* store, const char* geojson, char** out_json)
{
    if (!store || !geojson || !out_json) {
        return invalid("store, geojson and out must be non-null");
    }
    *out_json = nullptr;
    return guard([&] { *out_json = dup(ul::service::render(store->store.register_regions(geojson))); });
}

ul_status ul_query(ul_store* store, const char* endpoint, const char* params_json, char** out_json)
{
    if (!store || !endpoint || !out_json) {
        return invalid("store, endpoint and out must be non-null");
    }
    *out_json = nullptr;
    return guard([&] {
        const auto snap = store->store.snapshot();
        *out_json = dup(ul::service::render(ul::service::query(*snap, endpoint, params_of(params_json))));
    });
}

ul_status ul_train(ul_store* store, const char* request_json, char** out_json)
{
    if (!store || !request_json || !out_json) {
        return invalid("store, request and out must be non-null");
    }
    *out_json = nullptr;
    return guard([&] {
        const auto request = ul::service::TrainRequest::from_json(params_of(request_json));
        ul::service::check_train_inputs(*store->store.snapshot(), request);
        *out_json = dup(ul::service::render(ul::service::train(store->store, request)));
    });
}

ul_status ul_predict(ul_store* store, const char* request_json, char** out_json)
{
    if (!store || !request_json || !out_json) {
        return invalid("store, request and out must be non-null");
    }
    *out_json = nullptr;
    return guard([&] {
        *out_json = dup(ul::service::render(ul::service::predict(*store->store.snapshot(), params_of(request_json))));
    });
}

ul_status ul_model_export(ul_store* store, const char* model_id, const char* path)
{
    if (!store || !model_id || !path) {
        return invalid("store, model id and path must be non-null");
    }
    return guard([&] {
        const auto snap = store->store.snapshot();
        const auto* m = snap->find_model(model_id);
        if (!m) {
            ul::fail("UnknownModel", ul::ApiCode::not_found, std::string("no model '") + model_id + "'");
        }
        ul::write_file(path, ul::learn::serialize(*m->model));
    });
}

ul_status ul_evaluate_file(const char* model_path, const char* labeled_csv, char** out_json)
{
    if (!model_path || !labeled_csv || !out_json) {
        return invalid("model path, csv and out must be non-null");
    }
    *out_json = nullptr;
    return guard([&] {
        const auto model = ul::learn::deserialize(ul::read_file(model_path));
        const auto data = ul::resample::read_csv(labeled_csv);
        const auto report = ul::learn::evaluate(model, data, "test");
        const json body{{"model",
                         {{"spec", model.spec.to_json()},
                          {"feature_names", model.feature_names},
                          {"seed", model.seed},
                          {"train_rows", model.train_rows}}},
                        {"test", report.to_json()}};
        *out_json = dup(ul::service::render(body));
    });
}

ul_status ul_resample_csv(const char* labeled_csv, const char* method, uint64_t seed, char** out_csv,
                          char** out_report_json)
{
    if (!labeled_csv || !method || !out_csv || !out_report_json) {
        return invalid("csv, method and outputs must be non-null");
    }
    *out_csv = nullptr;
    *out_report_json = nullptr;
    return guard([&] {
        const auto m = ul::resample::parse_method(method);
        const auto data = ul::resample::read_csv(labeled_csv);
        const auto out = ul::resample::apply(m, data, seed);
        const auto before = data.counts(), after = out.counts();
        const json report{{"method", ul::resample::to_string(m)},
                          {"seed", seed},
                          {"before", {{"0", before.first}, {"1", before.second}}},
                          {"after", {{"0", after.first}, {"1", after.second}}}};
        *out_csv = dup(ul::resample::write_csv(out));
        *out_report_json = dup(ul::service::render(report));
    });
}

ul_status ul_features(ul_store* store, const char* params_json, char** out_train_csv, char** out_test_csv)
{
    if (!store || !out_train_csv || !out_test_csv) {
        return invalid("store and outputs must be non-null");
    }
    *out_train_csv = nullptr;
    *out_test_csv = nullptr;
    return guard([&] {
        const auto ex = ul::service::export_features(*store->store.snapshot(), params_of(params_json));
        *out_train_csv = dup(ex.train_csv);
        *out_test_csv = dup(ex.test_csv);
    });
}

char* ul_openapi(void)
{
    return dup(ul::service::render(ul::service::openapi()));
}

ul_status ul_serve(ul_store* store, const char* host, int port)
{
    if (!store || !host) {
        return invalid("store and host must be non-null");
    }
    return guard([&] {
        ul::service::Server server(store->store);
        const int bound = server.bind(host, port);
        std::fprintf(stderr, "urbanlens: serving %s on http://%s:%d\n", store->store.directory().c_str(), host, bound);
        server.listen();
    });
}

} // extern "C"
