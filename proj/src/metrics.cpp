// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/metrics.hpp"

#include <sstream>

namespace mmssl {

using nlohmann::json;

namespace {

std::string class_name(const std::vector<std::string>& names, std::size_t c) {
    return c < names.size() ? names[c] : "class_" + std::to_string(c);
}

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1_of(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                 std::size_t n_classes) {
    if (preds.size() != labels.size()) {
        throw ContractError("confusion_matrix: " + std::to_string(preds.size()) + " predictions for " +
                            std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix m(n_classes, std::vector<std::uint64_t>(n_classes, 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] >= n_classes || labels[i] >= n_classes) {
            throw ContractError("confusion_matrix: class index out of range at sample " + std::to_string(i));
        }
        ++m[labels[i]][preds[i]];
    }
    return m;
}

MetricsReport weighted_metrics_single(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                      std::size_t n_classes, const std::vector<std::string>& class_names) {
    MetricsReport report;
    report.task_type = TaskType::single_label;
    report.confusion = confusion_matrix(preds, labels, n_classes);
    report.n_samples = preds.size();
    const double total = static_cast<double>(preds.size());
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::uint64_t support = 0, predicted = 0;
        for (std::size_t j = 0; j < n_classes; ++j) {
            support += report.confusion[c][j];
            predicted += report.confusion[j][c];
        }
        const double tp = static_cast<double>(report.confusion[c][c]);
        ClassMetrics cm;
        cm.name = class_name(class_names, c);
        cm.support = support;
        cm.precision = ratio(tp, static_cast<double>(predicted));
        cm.recall = ratio(tp, static_cast<double>(support));
        cm.f1 = f1_of(cm.precision, cm.recall);
        const double weight = ratio(static_cast<double>(support), total);
        report.weighted_precision += weight * cm.precision;
        report.weighted_recall += weight * cm.recall;
        report.weighted_f1 += weight * cm.f1;
        report.per_class.push_back(std::move(cm));
    }
    report.weighted_accuracy = report.weighted_recall;
    return report;
}

MetricsReport weighted_metrics_multilabel(const Tensor& scores, std::span<const MultiLabel> labels, double threshold,
                                          const std::vector<std::string>& class_names) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("multilabel metrics: threshold must lie in (0, 1)");
    if (scores.rank() != 2 || scores.rows() != labels.size()) {
        throw ContractError("multilabel metrics: scores " + shape_string(scores.shape()) + " for " +
                            std::to_string(labels.size()) + " label rows");
    }
    const std::size_t n = scores.rows(), n_classes = scores.cols();
    MetricsReport report;
    report.task_type = TaskType::multi_label;
    report.n_samples = n;
    std::uint64_t total_support = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i].size() != n_classes) throw ContractError("multilabel metrics: label width mismatch");
            const bool truth = labels[i][c] != 0;
            const bool pred = static_cast<double>(scores(i, c)) > threshold;
            if (truth && pred) ++tp;
            else if (truth) ++fn;
            else if (pred) ++fp;
            else ++tn;
        }
        ClassMetrics cm;
        cm.name = class_name(class_names, c);
        const double pos = static_cast<double>(tp + fn), neg = static_cast<double>(tn + fp);
        cm.support = tp + fn;
        cm.binary_confusion = {tn, fp, fn, tp};
        cm.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
        cm.recall = ratio(static_cast<double>(tp), pos);
        cm.f1 = f1_of(cm.precision, cm.recall);
        cm.no_positives = pos == 0.0;
        cm.no_negatives = neg == 0.0;
        if (cm.no_positives) {
            cm.weighted_accuracy = ratio(static_cast<double>(tn), neg);
        } else if (cm.no_negatives) {
            cm.weighted_accuracy = ratio(static_cast<double>(tp), pos);
        } else {
            cm.weighted_accuracy = (static_cast<double>(tp) * neg / pos + static_cast<double>(tn)) / (2.0 * neg);
        }
        total_support += cm.support;
        report.per_class.push_back(std::move(cm));
    }
    for (const ClassMetrics& cm : report.per_class) {
        // With no positives anywhere the classes count equally.
        const double weight = total_support > 0
                                  ? static_cast<double>(cm.support) / static_cast<double>(total_support)
                                  : 1.0 / static_cast<double>(report.per_class.size());
        report.weighted_accuracy += weight * cm.weighted_accuracy;
        report.weighted_precision += weight * cm.precision;
        report.weighted_recall += weight * cm.recall;
        report.weighted_f1 += weight * cm.f1;
    }
    return report;
}

json report_to_json(const MetricsReport& r) {
    json per_class = json::array();
    for (const ClassMetrics& cm : r.per_class) {
        json entry = {{"class", cm.name},
                      {"support", cm.support},
                      {"precision", cm.precision},
                      {"recall", cm.recall},
                      {"f1", cm.f1}};
        if (r.task_type == TaskType::multi_label) {
            entry["weighted_accuracy"] = cm.weighted_accuracy;
            entry["no_positives"] = cm.no_positives;
            entry["no_negatives"] = cm.no_negatives;
        }
        per_class.push_back(std::move(entry));
    }
    json confusion = json::array();
    if (r.task_type == TaskType::multi_label) {
        for (const ClassMetrics& cm : r.per_class) {
            const auto& b = cm.binary_confusion;
            confusion.push_back(json::array({json::array({b[0], b[1]}), json::array({b[2], b[3]})}));
        }
    } else {
        for (const auto& row : r.confusion) confusion.push_back(row);
    }
    return json{{"task_type", std::string(to_string(r.task_type))},
                {"n_samples", r.n_samples},
                {"metrics",
                 {{"weighted_accuracy", r.weighted_accuracy},
                  {"weighted_f1", r.weighted_f1},
                  {"weighted_precision", r.weighted_precision},
                  {"weighted_recall", r.weighted_recall}}},
                {"per_class", per_class},
                {"confusion", confusion},
                {"definitions",
                 {{"wacc", r.task_type == TaskType::multi_label ? kMultiLabelWaccDefinition
                                                                 : kSingleLabelWaccDefinition}}}};
}

MetricsReport report_from_json(const json& doc) {
    MetricsReport r;
    try {
        const auto task = parse_task_type(doc.at("task_type").get<std::string>());
        if (!task || *task == TaskType::unlabeled) throw SchemaError("report: invalid task_type");
        r.task_type = *task;
        r.n_samples = doc.value("n_samples", std::uint64_t{0});
        const json& m = doc.at("metrics");
        r.weighted_accuracy = m.at("weighted_accuracy").get<double>();
        r.weighted_f1 = m.at("weighted_f1").get<double>();
        r.weighted_precision = m.at("weighted_precision").get<double>();
        r.weighted_recall = m.at("weighted_recall").get<double>();
        for (const json& e : doc.at("per_class")) {
            ClassMetrics cm;
            cm.name = e.at("class").get<std::string>();
            cm.support = e.at("support").get<std::uint64_t>();
            cm.precision = e.at("precision").get<double>();
            cm.recall = e.at("recall").get<double>();
            cm.f1 = e.at("f1").get<double>();
            cm.weighted_accuracy = e.value("weighted_accuracy", 0.0);
            cm.no_positives = e.value("no_positives", false);
            cm.no_negatives = e.value("no_negatives", false);
            r.per_class.push_back(std::move(cm));
        }
        const json& confusion = doc.at("confusion");
        if (r.task_type == TaskType::multi_label) {
            if (confusion.size() != r.per_class.size()) throw SchemaError("report: one 2x2 matrix per class expected");
            for (std::size_t c = 0; c < confusion.size(); ++c) {
                const json& b = confusion[c];
                r.per_class[c].binary_confusion = {b.at(0).at(0).get<std::uint64_t>(), b.at(0).at(1).get<std::uint64_t>(),
                                                   b.at(1).at(0).get<std::uint64_t>(), b.at(1).at(1).get<std::uint64_t>()};
            }
        } else {
            r.confusion = confusion.get<ConfusionMatrix>();
            for (const auto& row : r.confusion) {
                if (row.size() != r.confusion.size()) throw SchemaError("report: confusion matrix must be square");
            }
            if (r.confusion.size() != r.per_class.size()) {
                throw SchemaError("report: confusion size does not match per_class");
            }
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("report: ") + e.what());
    }
    return r;
}

std::string confusion_csv(const MetricsReport& r) {
    std::ostringstream os;
    if (r.task_type == TaskType::multi_label) {
        os << "class,tn,fp,fn,tp\n";
        for (const ClassMetrics& cm : r.per_class) {
            const auto& b = cm.binary_confusion;
            os << csv_field(cm.name) << ',' << b[0] << ',' << b[1] << ',' << b[2] << ',' << b[3] << '\n';
        }
        return os.str();
    }
    os << "true\\pred";
    for (const ClassMetrics& cm : r.per_class) os << ',' << csv_field(cm.name);
    os << '\n';
    for (std::size_t i = 0; i < r.confusion.size(); ++i) {
        os << csv_field(r.per_class[i].name);
        for (const auto v : r.confusion[i]) os << ',' << v;
        os << '\n';
    }
    return os.str();
}

std::string per_class_csv(const MetricsReport& r) {
    std::ostringstream os;
    os.precision(17);
    const bool multi = r.task_type == TaskType::multi_label;
    os << "class,support,precision,recall,f1" << (multi ? ",weighted_accuracy" : "") << '\n';
    for (const ClassMetrics& cm : r.per_class) {
        os << csv_field(cm.name) << ',' << cm.support << ',' << cm.precision << ',' << cm.recall << ',' << cm.f1;
        if (multi) os << ',' << cm.weighted_accuracy;
        os << '\n';
    }
    return os.str();
}

}  // namespace mmssl
