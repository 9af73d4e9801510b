#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace ul::test {

struct TunedSet {
    std::string method;
    nlohmann::json dt, gbt, lr, nb, rf;
};

// Hyperparameters reported as best for each resampling method, in the
// sklearn spelling the parsers accept.
inline std::vector<TunedSet> tuned_sets()
{
    using nlohmann::json;
    return {
        {"original",
         json::parse(R"({"class_weight":"balanced","criterion":"entropy","max_depth":5,"max_features":null,
                         "min_samples_leaf":13,"min_samples_split":8})"),
         json::parse(R"({"learning_rate":0.4887,"max_depth":8,"max_features":"sqrt",
                         "min_samples_leaf":0.010311698290487566,"min_samples_split":0.1405,"n_estimators":600,
                         "subsample":0.5686})"),
         json::parse(R"({"C":0.0189,"class_weight":"balanced","max_iter":10264,"penalty":"l2","solver":"liblinear"})"),
         json::parse(R"({"priors":[0.5,0.5],"var_smoothing":3.6867e-07})"),
         json::parse(R"({"bootstrap":false,"class_weight":"balanced","max_depth":121,"max_features":"log2",
                         "min_samples_leaf":20,"min_samples_split":5,"n_estimators":450})")},
        {"random_us",
         json::parse(R"({"class_weight":"balanced","criterion":"entropy","max_depth":5,"max_features":null,
                         "min_samples_leaf":3,"min_samples_split":19})"),
         json::parse(R"({"learning_rate":0.0926,"max_depth":2,"max_features":null,"min_samples_leaf":0.17560,
                         "min_samples_split":0.3059,"n_estimators":800,"subsample":0.8788})"),
         json::parse(R"({"C":0.0203,"class_weight":null,"max_iter":10031,"penalty":"l1","solver":"saga"})"),
         json::parse(R"({"priors":[0.5,0.5],"var_smoothing":2.767e-06})"),
         json::parse(R"({"bootstrap":false,"class_weight":"balanced_subsample","max_depth":150,"max_features":"log2",
                         "min_samples_leaf":7,"min_samples_split":11,"n_estimators":350})")},
        {"nearmiss",
         json::parse(R"({"class_weight":"balanced","criterion":"gini","max_depth":5,"max_features":null,
                         "min_samples_leaf":2,"min_samples_split":16})"),
         json::parse(R"({"learning_rate":0.3161,"max_depth":2,"max_features":null,
                         "min_samples_leaf":0.18175331720247354,"min_samples_split":0.4387,"n_estimators":800,
                         "subsample":0.6105})"),
         json::parse(R"({"C":0.0084,"class_weight":"balanced","max_iter":10336,"penalty":"l1","solver":"liblinear"})"),
         json::parse(R"({"priors":[0.3,0.7],"var_smoothing":3.079e-05})"),
         json::parse(R"({"bootstrap":false,"class_weight":"balanced_subsample","max_depth":150,"max_features":"log2",
                         "min_samples_leaf":7,"min_samples_split":11,"n_estimators":350})")},
        {"enn",
         json::parse(R"({"class_weight":"balanced","criterion":"gini","max_depth":5,"max_features":null,
                         "min_samples_leaf":17,"min_samples_split":8})"),
         json::parse(R"({"learning_rate":0.1106,"max_depth":8,"max_features":"sqrt","min_samples_leaf":0.0354,
                         "min_samples_split":0.0578,"n_estimators":450,"subsample":0.8939})"),
         json::parse(R"({"C":4.451,"class_weight":"balanced","max_iter":10386,"penalty":"l2","solver":"liblinear"})"),
         json::parse(R"({"priors":[0.5,0.5],"var_smoothing":3.798e-07})"),
         json::parse(R"({"bootstrap":true,"class_weight":"balanced_subsample","max_depth":99,"max_features":"sqrt",
                         "min_samples_leaf":18,"min_samples_split":20,"n_estimators":950})")},
        {"renn",
         json::parse(R"({"class_weight":"balanced","criterion":"entropy","max_depth":5,"max_features":null,
                         "min_samples_leaf":10,"min_samples_split":2})"),
         json::parse(R"({"learning_rate":0.2916,"max_depth":1,"max_features":null,"min_samples_leaf":0.1039,
                         "min_samples_split":0.3341,"n_estimators":750,"subsample":0.9636})"),
         json::parse(R"({"C":5.503,"class_weight":"balanced","max_iter":10130,"penalty":"l1","solver":"liblinear"})"),
         json::parse(R"({"priors":[0.5,0.5],"var_smoothing":8.2921e-07})"),
         json::parse(R"({"bootstrap":true,"class_weight":"balanced","max_depth":128,"max_features":"log2",
                         "min_samples_leaf":16,"min_samples_split":9,"n_estimators":200})")},
    };
}

} // namespace ul::test
