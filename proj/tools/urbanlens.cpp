// urbanlens command-line front end. Talks to the library only through the C API.
#include "urbanlens/urbanlens.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DomainError {
    std::string text;
};

struct Owned {
    char* p = nullptr;
    ~Owned() { ul_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

void check(ul_status st)
{
    if (st != UL_OK) {
        throw DomainError{ul_last_error()};
    }
}

std::string slurp(const std::string& path)
{
    if (path == "-") {
        return std::string(std::istreambuf_iterator<char>(std::cin), {});
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DomainError{"FileNotFound: cannot read '" + path + "'"};
    }
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void spill(const std::string& path, const std::string& text)
{
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw DomainError{"WriteFailed: cannot write '" + path + "'"};
    }
}

struct Table {
    std::string title;
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> rows;
};

std::string cell(const json& v)
{
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "-";
    return v.dump();
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') out += '"';
    }
    return out + "\"";
}

void print_tables(const std::vector<Table>& tables, const std::string& format)
{
    for (std::size_t t = 0; t < tables.size(); ++t) {
        const auto& tab = tables[t];
        if (format == "csv") {
            std::vector<std::string> h;
            for (const auto& s : tab.headers) h.push_back(csv_field(s));
            for (std::size_t i = 0; i < h.size(); ++i) std::cout << (i ? "," : "") << h[i];
            std::cout << "\n";
            for (const auto& r : tab.rows) {
                for (std::size_t i = 0; i < r.size(); ++i) std::cout << (i ? "," : "") << csv_field(r[i]);
                std::cout << "\n";
            }
            continue;
        }
        if (t > 0) std::cout << "\n";
        if (!tab.title.empty()) std::cout << tab.title << "\n";
        std::vector<std::size_t> width(tab.headers.size());
        for (std::size_t i = 0; i < width.size(); ++i) width[i] = tab.headers[i].size();
        for (const auto& r : tab.rows)
            for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
        auto line = [&](const std::vector<std::string>& r) {
            std::string out;
            for (std::size_t i = 0; i < width.size(); ++i) {
                const std::string& s = i < r.size() ? r[i] : std::string();
                out += s + std::string(width[i] - s.size() + (i + 1 < width.size() ? 2 : 0), ' ');
            }
            while (!out.empty() && out.back() == ' ') out.pop_back();
            std::cout << out << "\n";
        };
        line(tab.headers);
        std::vector<std::string> rule;
        for (auto w : width) rule.push_back(std::string(w, '-'));
        line(rule);
        for (const auto& r : tab.rows) line(r);
    }
}

Table key_values(const json& body, const std::vector<std::string>& keys, std::string title = {})
{
    Table t{std::move(title), {"field", "value"}, {}};
    for (const auto& k : keys) {
        if (body.contains(k)) t.rows.push_back({k, cell(body[k])});
    }
    return t;
}

std::vector<std::string> report_row(const std::string& label, const json& r)
{
    return {label,        cell(r["time_s"]), cell(r["accuracy"]), cell(r["precision"]),
            cell(r["recall"]), cell(r["f1"]), cell(r["auc"]),      cell(r["error"])};
}

const std::vector<std::string> kReportHeaders{"Model", "Time (s)", "Accuracy", "Precision", "Recall", "F1", "AUC", "Error"};

std::vector<Table> tables_for(const std::string& command, const json& body)
{
    if (command == "datasets") {
        Table t{"", {"name", "version", "category", "granularity", "geometry", "rows", "dropped", "dedup"}, {}};
        for (const auto& d : body["datasets"]) {
            const auto& p = d["provenance"];
            t.rows.push_back({cell(d["name"]), cell(d["version"]), cell(d["category"]), cell(d["granularity"]),
                              cell(d["geometry"]), cell(d["rows"]),
                              std::to_string(p.value("dropped_type_mismatch", 0) + p.value("dropped_unresolved", 0)),
                              cell(p["dedup_removed"])});
        }
        return {t};
    }
    if (command == "ingest") {
        Table t{"", {"name", "version", "rows_read", "rows_kept", "type_mismatch", "unresolved", "dedup_removed"}, {}};
        const json list = body.contains("ingested") ? body["ingested"] : json::array({body});
        for (const auto& d : list) {
            const auto& p = d["provenance"];
            t.rows.push_back({cell(d["name"]), cell(d["version"]), cell(p["rows_read"]), cell(p["rows_kept"]),
                              cell(p["dropped_type_mismatch"]), cell(p["dropped_unresolved"]), cell(p["dedup_removed"])});
        }
        return {t};
    }
    if (command == "regions") {
        Table t{"", {"region_id", "name"}, {}};
        for (const auto& f : body["features"]) {
            t.rows.push_back({cell(f["properties"]["region_id"]), cell(f["properties"]["name"])});
        }
        return {t};
    }
    if (command == "rank") {
        Table t{"Ranking " + cell(body["from"]) + " .. " + cell(body["to"]) + " (" + cell(body["order"]) + ")",
                {"rank", "region_id", "value"},
                {}};
        std::size_t i = 0;
        for (const auto& e : body["entries"]) t.rows.push_back({std::to_string(++i), cell(e["region_id"]), cell(e["value"])});
        return {t};
    }
    if (command == "insights") {
        Table t{"Insights " + cell(body["from"]) + " .. " + cell(body["to"]),
                {"#", "a", "b", "rho", "p_value", "n", "score", "penalized"},
                {}};
        std::size_t i = 0;
        for (const auto& in : body["insights"]) {
            t.rows.push_back({std::to_string(++i), cell(in["a"]["id"]), cell(in["b"]["id"]), cell(in["rho"]),
                              cell(in["p_value"]), cell(in["n"]), cell(in["score"]), cell(in["penalized"])});
        }
        return {t};
    }
    if (command == "moran") {
        return {key_values(body, {"variable", "from", "to", "n", "I", "expected_I", "pseudo_p", "permutations",
                                  "permutation_mean", "permutation_sd", "seed", "weights", "contiguity"})};
    }
    if (command == "lisa") {
        Table t{"LISA " + cell(body["variable"]) + " (alpha " + cell(body["alpha"]) + ", " + cell(body["permutations"]) +
                    " permutations)",
                {"region_id", "value", "z", "lag_z", "local_I", "pseudo_p", "quadrant", "cluster"},
                {}};
        for (const auto& r : body["regions"]) {
            t.rows.push_back({cell(r["region_id"]), cell(r["value"]), cell(r["z"]), cell(r["lag_z"]), cell(r["local_I"]),
                              cell(r["pseudo_p"]), cell(r["quadrant"]), cell(r["cluster"])});
        }
        return {t};
    }
    if (command == "resample") {
        Table t{"", {"Technique", "Class 0", "Class 1"}, {}};
        t.rows.push_back({"Original", cell(body["before"]["0"]), cell(body["before"]["1"])});
        t.rows.push_back({cell(body["method"]), cell(body["after"]["0"]), cell(body["after"]["1"])});
        return {t};
    }
    if (command == "train" || command == "evaluate") {
        std::string label = command == "train" ? cell(body["pipeline"]["model"]) : cell(body["model"]["spec"]["kind"]);
        std::vector<Table> out;
        if (body.contains("train")) {
            out.push_back({"Training", kReportHeaders, {report_row(label, body["train"])}});
        }
        out.push_back({"Testing", kReportHeaders, {report_row(label, body["test"])}});
        return out;
    }
    if (command == "models") {
        Table t{"", {"id", "name", "model", "resample", "test_auc", "test_f1"}, {}};
        for (const auto& m : body["models"]) {
            t.rows.push_back({cell(m["id"]), cell(m["name"]), cell(m["pipeline"]["model"]), cell(m["pipeline"]["resample"]),
                              cell(m["test"]["auc"]), cell(m["test"]["f1"])});
        }
        return {t};
    }
    if (command == "predict") {
        Table t{"", {"row", "p1", "label"}, {}};
        std::size_t i = 0;
        for (const auto& p : body["predictions"]) t.rows.push_back({std::to_string(i++), cell(p["p1"]), cell(p["label"])});
        return {t};
    }
    Table t{"", {"field", "value"}, {}};
    for (const auto& [k, v] : body.items()) t.rows.push_back({k, cell(v)});
    return {t};
}

void emit(const std::string& command, const std::string& body_text, const std::string& format)
{
    if (format == "json") {
        std::cout << body_text;
        return;
    }
    print_tables(tables_for(command, json::parse(body_text)), format);
}

std::string default_data_dir()
{
    const char* env = std::getenv("URBANLENS_DATA_DIR");
    return env && *env ? env : "./store";
}

class StoreHandle {
public:
    explicit StoreHandle(const std::string& dir) { check(ul_store_open(dir.c_str(), &s_)); }
    ~StoreHandle() { ul_store_close(s_); }
    ul_store* get() const { return s_; }

private:
    ul_store* s_ = nullptr;
};

// Only options given on the command line become parameters, mirroring a query string.
struct ParamBuilder {
    json params = json::object();
    void add(const CLI::App* app, const std::string& flag, const std::string& key, const std::string& value)
    {
        if (app->count(flag) > 0) params[key] = value;
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"urbanlens: urban data insights, spatial autocorrelation and traffic-risk models"};
    app.require_subcommand(1);
    std::string data_dir = default_data_dir();
    std::string format = "table";
    bool quiet = false;
    app.add_option("--data-dir", data_dir, "store directory (env URBANLENS_DATA_DIR)");
    app.add_option("--format", format, "output format")->check(CLI::IsMember({"table", "json", "csv"}));
    app.add_flag("-q,--quiet", quiet, "suppress warnings");
    app.fallthrough();

    // gen
    auto* gen = app.add_subcommand("gen", "write a synthetic fixture city");
    std::size_t regions = 33, days = 365;
    std::uint64_t seed = 7;
    std::string gen_out = "./city";
    bool gen_ingest = false;
    gen->add_option("--regions", regions, "region count")->check(CLI::Range(2, 10000));
    gen->add_option("--days", days, "day count")->check(CLI::Range(1, 20000));
    gen->add_option("--seed", seed, "random seed");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_flag("--ingest", gen_ingest, "also ingest the city into the store");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "ingest a dataset (manifest + CSV) or a generated city");
    std::string manifest_path, csv_path, geojson_path, city_dir;
    ingest->add_option("--manifest", manifest_path, "manifest JSON file");
    ingest->add_option("--csv", csv_path, "CSV file, '-' for stdin");
    ingest->add_option("--geojson", geojson_path, "regions GeoJSON");
    ingest->add_option("--city", city_dir, "directory written by 'gen'");

    auto* datasets = app.add_subcommand("datasets", "list ingested datasets");
    auto* regions_cmd = app.add_subcommand("regions", "list registered regions (GeoJSON in json format)");
    auto* models = app.add_subcommand("models", "list trained models");

    // insights
    auto* insights = app.add_subcommand("insights", "top-k correlation insights");
    std::string bbox, from, to, penalty, k_text;
    insights->add_option("--bbox", bbox, "lonmin,latmin,lonmax,latmax");
    insights->add_option("--from", from, "first date");
    insights->add_option("--to", to, "last date");
    insights->add_option("-k", k_text, "insight count");
    insights->add_option("--penalty", penalty, "same-category penalty");

    // rank
    auto* rank = app.add_subcommand("rank", "rank regions by summed aggregates");
    std::string categories, order;
    rank->add_option("--categories", categories, "comma-separated categories or dataset.column")->required();
    rank->add_option("--from", from, "first date");
    rank->add_option("--to", to, "last date");
    rank->add_option("--order", order, "desc or asc");

    // moran / lisa
    std::string variable, permutations, alpha, sp_seed, weights, contiguity;
    auto add_spatial = [&](CLI::App* c) {
        c->add_option("--variable", variable, "dataset.column")->required();
        c->add_option("--from", from, "first date");
        c->add_option("--to", to, "last date");
        c->add_option("--permutations", permutations, "permutation count");
        c->add_option("--seed", sp_seed, "permutation seed");
        c->add_option("--weights", weights, "row or binary");
        c->add_option("--contiguity", contiguity, "queen or rook");
        c->add_option("--alpha", alpha, "significance level (local only)");
    };
    auto* moran = app.add_subcommand("moran", "global Moran's I (--local for LISA)");
    bool local = false;
    add_spatial(moran);
    moran->add_flag("--local", local, "local indicators and cluster labels");
    auto* lisa = app.add_subcommand("lisa", "local Moran's I cluster labels");
    add_spatial(lisa);

    // resample
    auto* resample = app.add_subcommand("resample", "resample a labeled CSV");
    std::string method = "smote_tomek", in_path = "-", out_path;
    std::uint64_t rs_seed = 7;
    resample->add_option("--method", method, "resampling technique");
    resample->add_option("--seed", rs_seed, "random seed");
    resample->add_option("--in", in_path, "labeled CSV, '-' for stdin");
    resample->add_option("--out", out_path, "output CSV ('-' for stdout)")->required();

    // features
    auto* features = app.add_subcommand("features", "export the labeled risk feature table");
    std::string feat_list, train_out, test_out, test_fraction, ft_seed;
    features->add_option("--features", feat_list, "comma-separated dataset.column list");
    features->add_option("--test-fraction", test_fraction, "stratified test share (0 = no split)");
    features->add_option("--seed", ft_seed, "split seed");
    features->add_option("--train-out", train_out, "CSV for all rows or the train split")->required();
    features->add_option("--test-out", test_out, "CSV for the test split");

    // train
    auto* train = app.add_subcommand("train", "train and evaluate a risk model, registering it in the store");
    std::string model = "dt", tr_resample = "original", hyper, name, tr_features, model_out;
    std::size_t tune_budget = 0, folds = 3;
    double tr_fraction = 0.2;
    bool scale = false;
    train->add_option("--model", model, "dt, nb, lr, gbt or rf");
    train->add_option("--resample", tr_resample, "resampling technique");
    train->add_option("--tune-budget", tune_budget, "random-search trials (0 = fixed hyperparameters)");
    train->add_option("--folds", folds, "cross-validation folds");
    train->add_option("--seed", seed, "random seed");
    train->add_option("--test-fraction", tr_fraction, "stratified test share");
    train->add_option("--hyperparameters", hyper, "JSON object");
    train->add_option("--features", tr_features, "comma-separated dataset.column list");
    train->add_option("--name", name, "registry name");
    train->add_flag("--scale", scale, "z-score features before fitting");
    train->add_option("--out", model_out, "also write the model file here");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a model file on a labeled CSV");
    std::string model_file, test_csv;
    evaluate->add_option("--model-file", model_file, "model file")->required();
    evaluate->add_option("--test", test_csv, "labeled CSV, '-' for stdin")->required();

    // predict
    auto* predict = app.add_subcommand("predict", "risk probabilities from a stored model");
    std::string model_id, rows_path = "-";
    predict->add_option("--model-id", model_id, "model id")->required();
    predict->add_option("--rows", rows_path, "JSON array of feature rows, '-' for stdin");

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP API");
    std::string host = "127.0.0.1";
    int port = 8080;
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port (0 picks a free one)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    if (quiet) {
        ul_set_warnings(0);
    }

    try {
        if (gen->parsed()) {
            check(ul_generate(gen_out.c_str(), regions, days, seed));
            json body{{"directory", gen_out}, {"regions", regions}, {"days", days}, {"seed", seed}};
            if (gen_ingest) {
                city_dir = gen_out;
            } else {
                emit("gen", body.dump(2) + "\n", format);
                return 0;
            }
        }
        if (gen->parsed() || ingest->parsed()) {
            StoreHandle store(data_dir);
            if (!city_dir.empty()) {
                const std::string geo = slurp((fs::path(city_dir) / "regions.geojson").string());
                std::vector<fs::path> manifests;
                for (const auto& e : fs::directory_iterator(city_dir)) {
                    const auto fname = e.path().filename().string();
                    if (fname.size() > 14 && fname.substr(fname.size() - 14) == ".manifest.json") manifests.push_back(e.path());
                }
                std::sort(manifests.begin(), manifests.end());
                json list = json::array();
                for (const auto& m : manifests) {
                    const auto text = slurp(m.string());
                    const auto doc = json::parse(text);
                    const auto base = m.filename().string().substr(0, m.filename().string().size() - 14);
                    const std::string src = doc.value("source_path", base + ".csv");
                    const auto csv = slurp((fs::path(city_dir) / src).string());
                    Owned out;
                    check(ul_ingest(store.get(), text.c_str(), csv.c_str(), list.empty() ? geo.c_str() : nullptr, &out.p));
                    list.push_back(json::parse(out.str()));
                }
                emit("ingest", json{{"ingested", list}}.dump(2) + "\n", format);
                return 0;
            }
            if (manifest_path.empty() || csv_path.empty()) {
                std::cerr << "error: ingest needs --manifest and --csv, or --city\n\n" << ingest->help();
                return 2;
            }
            const auto text = slurp(manifest_path);
            const auto csv = slurp(csv_path);
            std::optional<std::string> geo;
            if (!geojson_path.empty()) geo = slurp(geojson_path);
            Owned out;
            check(ul_ingest(store.get(), text.c_str(), csv.c_str(), geo ? geo->c_str() : nullptr, &out.p));
            emit("ingest", out.str(), format);
            return 0;
        }
        auto run_query = [&](const char* endpoint, const std::string& command, const json& params) {
            StoreHandle store(data_dir);
            Owned out;
            check(ul_query(store.get(), endpoint, params.dump().c_str(), &out.p));
            emit(command, out.str(), format);
            return 0;
        };
        if (datasets->parsed()) return run_query("datasets", "datasets", json::object());
        if (regions_cmd->parsed()) return run_query("regions", "regions", json::object());
        if (models->parsed()) return run_query("models", "models", json::object());
        if (insights->parsed()) {
            ParamBuilder p;
            p.add(insights, "--bbox", "bbox", bbox);
            p.add(insights, "--from", "from", from);
            p.add(insights, "--to", "to", to);
            p.add(insights, "-k", "k", k_text);
            p.add(insights, "--penalty", "penalty", penalty);
            return run_query("insights", "insights", p.params);
        }
        if (rank->parsed()) {
            ParamBuilder p;
            p.add(rank, "--categories", "categories", categories);
            p.add(rank, "--from", "from", from);
            p.add(rank, "--to", "to", to);
            p.add(rank, "--order", "order", order);
            return run_query("rank", "rank", p.params);
        }
        if (moran->parsed() || lisa->parsed()) {
            CLI::App* c = moran->parsed() ? moran : lisa;
            const bool is_local = lisa->parsed() || local;
            if (!is_local && c->count("--alpha") > 0) {
                std::cerr << "error: --alpha applies to local statistics only (add --local)\n";
                return 2;
            }
            ParamBuilder p;
            p.add(c, "--variable", "variable", variable);
            p.add(c, "--from", "from", from);
            p.add(c, "--to", "to", to);
            p.add(c, "--permutations", "permutations", permutations);
            p.add(c, "--seed", "seed", sp_seed);
            p.add(c, "--weights", "weights", weights);
            p.add(c, "--contiguity", "contiguity", contiguity);
            p.add(c, "--alpha", "alpha", alpha);
            return run_query(is_local ? "spatial/lisa" : "spatial/global", is_local ? "lisa" : "moran", p.params);
        }
        if (resample->parsed()) {
            const auto csv = slurp(in_path);
            Owned out_csv, report;
            check(ul_resample_csv(csv.c_str(), method.c_str(), rs_seed, &out_csv.p, &report.p));
            spill(out_path, out_csv.str());
            if (out_path == "-") {
                std::cerr << report.str();
            } else {
                emit("resample", report.str(), format);
            }
            return 0;
        }
        if (features->parsed()) {
            StoreHandle store(data_dir);
            ParamBuilder p;
            p.add(features, "--features", "features", feat_list);
            p.add(features, "--test-fraction", "test_fraction", test_fraction);
            p.add(features, "--seed", "seed", ft_seed);
            Owned tr, te;
            check(ul_features(store.get(), p.params.dump().c_str(), &tr.p, &te.p));
            spill(train_out, tr.str());
            if (!test_out.empty()) spill(test_out, te.str());
            const auto lines = [](const std::string& s) {
                return s.empty() ? 0 : static_cast<long>(std::count(s.begin(), s.end(), '\n')) - 1;
            };
            emit("features", json{{"train_rows", lines(tr.str())}, {"test_rows", lines(te.str())}}.dump(2) + "\n", format);
            return 0;
        }
        if (train->parsed()) {
            StoreHandle store(data_dir);
            json request{{"model", model},
                         {"resample", tr_resample},
                         {"tune_budget", tune_budget},
                         {"folds", folds},
                         {"seed", seed},
                         {"test_fraction", tr_fraction},
                         {"scale", scale}};
            if (!name.empty()) request["name"] = name;
            if (!hyper.empty()) {
                try {
                    request["hyperparameters"] = json::parse(hyper);
                } catch (const json::exception&) {
                    std::cerr << "error: --hyperparameters is not valid JSON\n";
                    return 2;
                }
            }
            if (!tr_features.empty()) {
                json list = json::array();
                std::stringstream ss(tr_features);
                for (std::string item; std::getline(ss, item, ',');) list.push_back(item);
                request["features"] = list;
            }
            Owned out;
            check(ul_train(store.get(), request.dump().c_str(), &out.p));
            if (!model_out.empty()) {
                const auto record = json::parse(out.str());
                check(ul_model_export(store.get(), record["id"].get<std::string>().c_str(), model_out.c_str()));
            }
            emit("train", out.str(), format);
            return 0;
        }
        if (evaluate->parsed()) {
            const auto csv = slurp(test_csv);
            Owned out;
            check(ul_evaluate_file(model_file.c_str(), csv.c_str(), &out.p));
            emit("evaluate", out.str(), format);
            return 0;
        }
        if (predict->parsed()) {
            StoreHandle store(data_dir);
            json rows;
            try {
                rows = json::parse(slurp(rows_path));
            } catch (const json::exception&) {
                std::cerr << "error: --rows is not valid JSON\n";
                return 2;
            }
            const json request{{"model_id", model_id}, {"rows", rows}};
            Owned out;
            check(ul_predict(store.get(), request.dump().c_str(), &out.p));
            emit("predict", out.str(), format);
            return 0;
        }
        if (serve->parsed()) {
            StoreHandle store(data_dir);
            check(ul_serve(store.get(), host.c_str(), port));
            return 0;
        }
    } catch (const DomainError& e) {
        std::cerr << e.text << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "MalformedInput: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help();
    return 2;
}
