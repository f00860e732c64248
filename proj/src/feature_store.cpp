// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/feature_store.hpp"

#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"
#include "mmssl/mmft.hpp"
#include "mmssl/rng.hpp"

namespace mmssl {

using nlohmann::json;

std::string_view to_string(TaskType t) noexcept {
    switch (t) {
        case TaskType::single_label: return "single_label";
        case TaskType::multi_label: return "multi_label";
        case TaskType::unlabeled: return "unlabeled";
    }
    return "unknown";
}

std::optional<TaskType> parse_task_type(std::string_view name) noexcept {
    for (const TaskType t : {TaskType::single_label, TaskType::multi_label, TaskType::unlabeled}) {
        if (to_string(t) == name) return t;
    }
    return std::nullopt;
}

std::string_view to_string(Split s) noexcept {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "unknown";
}

std::size_t DatasetInfo::dim(Modality m) const {
    const auto& d = modality_dims[index_of(m)];
    if (!d) throw ContractError("dataset '" + name + "' has no " + std::string(to_string(m)) + " modality");
    return *d;
}

namespace {

const json& field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw SchemaError(where + ": missing field '" + key + "'");
    }
    return obj.at(key);
}

Label parse_label(const json& j, TaskType task, std::size_t n_classes, const std::string& where) {
    if (j.is_null()) {
        if (task == TaskType::unlabeled) return std::monostate{};
        throw SchemaError(where + ": missing label for " + std::string(to_string(task)) + " dataset");
    }
    switch (task) {
        case TaskType::unlabeled:
            throw SchemaError(where + ": label present in an unlabeled dataset");
        case TaskType::single_label: {
            if (!j.is_number_integer() || j.get<long long>() < 0) {
                throw SchemaError(where + ": single_label label must be a non-negative integer");
            }
            const auto idx = j.get<std::size_t>();
            if (idx >= n_classes) throw SchemaError(where + ": label " + std::to_string(idx) + " out of range");
            return idx;
        }
        case TaskType::multi_label: {
            if (!j.is_array() || j.size() != n_classes) {
                throw SchemaError(where + ": multi_label label must be an array of " + std::to_string(n_classes) +
                                  " numbers");
            }
            std::vector<double> raw;
            for (const auto& v : j) {
                if (!v.is_number()) throw SchemaError(where + ": multi_label entries must be numbers");
                raw.push_back(v.get<double>());
            }
            return binarize_labels(raw);
        }
    }
    return std::monostate{};
}

json label_to_json(const Label& label) {
    if (const auto* idx = std::get_if<std::size_t>(&label)) return *idx;
    if (const auto* ml = std::get_if<MultiLabel>(&label)) {
        json arr = json::array();
        for (const auto v : *ml) arr.push_back(static_cast<int>(v));
        return arr;
    }
    return nullptr;
}

json info_to_json(const DatasetInfo& info) {
    json dims = json::object();
    for (const Modality m : kAllModalities) {
        if (info.has(m)) dims[std::string(to_string(m))] = info.dim(m);
    }
    return json{{"name", info.name},
                {"task_type", std::string(to_string(info.task_type))},
                {"class_names", info.class_names},
                {"modality_dims", dims}};
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw MissingFileError("missing manifest: " + path.string());
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": not valid JSON: " + e.what());
    }
    const std::string where = path.string();

    Manifest manifest;
    manifest.base_dir = path.parent_path();
    DatasetInfo& info = manifest.info;
    try {
        info.name = field(doc, "name", where).get<std::string>();
        const auto task = parse_task_type(field(doc, "task_type", where).get<std::string>());
        if (!task) throw SchemaError(where + ": unknown task_type");
        info.task_type = *task;
        info.class_names = field(doc, "class_names", where).get<std::vector<std::string>>();
        if (info.task_type != TaskType::unlabeled && info.class_names.empty()) {
            throw SchemaError(where + ": class_names must be non-empty for a labeled dataset");
        }
        const json& dims = field(doc, "modality_dims", where);
        if (!dims.is_object() || dims.empty()) throw SchemaError(where + ": modality_dims must be a non-empty object");
        for (const auto& [key, value] : dims.items()) {
            const auto m = parse_modality(key);
            if (!m) throw SchemaError(where + ": unknown modality '" + key + "' in modality_dims");
            if (!value.is_number_integer() || value.get<long long>() <= 0) {
                throw SchemaError(where + ": modality_dims." + key + " must be a positive integer");
            }
            info.modality_dims[index_of(*m)] = value.get<std::size_t>();
        }

        const json& splits = field(doc, "splits", where);
        std::set<std::string> seen;
        for (const Split s : kAllSplits) {
            const std::string split_name(to_string(s));
            if (!splits.contains(split_name)) continue;
            std::set<std::string> in_split;
            for (const json& entry : splits.at(split_name)) {
                SampleRef ref;
                ref.sample_id = field(entry, "sample_id", where + " (" + split_name + ")").get<std::string>();
                const std::string sample_where = where + ": sample '" + ref.sample_id + "'";
                if (!in_split.insert(ref.sample_id).second) {
                    throw SchemaError(sample_where + ": duplicate id within split " + split_name);
                }
                if (seen.count(ref.sample_id) != 0) {
                    throw SplitOverlapError(where + ": sample '" + ref.sample_id + "' appears in more than one split");
                }
                const json& features = field(entry, "features", sample_where);
                for (const auto& [key, value] : features.items()) {
                    const auto m = parse_modality(key);
                    if (!m || !info.has(*m)) {
                        throw SchemaError(sample_where + ": modality '" + key + "' not declared in modality_dims");
                    }
                    ref.paths[index_of(*m)] = value.get<std::string>();
                }
                for (const Modality m : kAllModalities) {
                    if (info.has(m) && !ref.paths[index_of(m)]) {
                        throw SchemaError(sample_where + ": missing " + std::string(to_string(m)) + " feature path");
                    }
                }
                ref.label = parse_label(entry.contains("label") ? entry.at("label") : json(nullptr), info.task_type,
                                        info.class_names.size(), sample_where);
                manifest.splits[static_cast<std::size_t>(s)].push_back(std::move(ref));
            }
            seen.insert(in_split.begin(), in_split.end());
        }
    } catch (const json::exception& e) {
        throw SchemaError(where + ": " + e.what());
    }
    return manifest;
}

SampleRecord read_record(const Manifest& manifest, const SampleRef& ref) {
    SampleRecord record;
    record.sample_id = ref.sample_id;
    record.label = ref.label;
    for (const Modality m : kAllModalities) {
        const auto& rel = ref.paths[index_of(m)];
        if (!rel) continue;
        const std::filesystem::path path = manifest.base_dir / *rel;
        Tensor t;
        try {
            t = mmft::load(path);
        } catch (const MissingFileError&) {
            throw MissingFileError("sample '" + ref.sample_id + "': missing " + std::string(to_string(m)) +
                                   " feature file " + path.string());
        } catch (const DataError& e) {
            throw DataError("sample '" + ref.sample_id + "': " + e.what());
        }
        const std::size_t declared = manifest.info.dim(m);
        if (t.rank() == 2) {
            // Sequence of per-step features.
            if (t.cols() != declared || t.rows() == 0) {
                throw DimMismatchError(ref.sample_id, std::string(to_string(m)) + " file has shape " +
                                                          shape_string(t.shape()) + ", manifest declares dim " +
                                                          std::to_string(declared));
            }
            std::vector<Tensor> steps;
            for (std::size_t r = 0; r < t.rows(); ++r) {
                steps.emplace_back(Shape{declared}, std::vector<float>(t.row(r).begin(), t.row(r).end()));
            }
            t = average_over_time(steps);
        } else if (t.rank() != 1 || t.size() != declared) {
            throw DimMismatchError(ref.sample_id, std::string(to_string(m)) + " file has shape " +
                                                      shape_string(t.shape()) + ", manifest declares dim " +
                                                      std::to_string(declared));
        }
        if (!t.all_finite()) {
            throw DataError("sample '" + ref.sample_id + "': non-finite values in " + std::string(to_string(m)));
        }
        record.features[index_of(m)] = std::move(t);
    }
    return record;
}

Dataset load_dataset(const Manifest& manifest) {
    Dataset dataset;
    dataset.info = manifest.info;
    for (const Split s : kAllSplits) {
        for (const SampleRef& ref : manifest.split(s)) dataset.split(s).push_back(read_record(manifest, ref));
    }
    return dataset;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) { return load_dataset(load_manifest(manifest_path)); }

std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "features");
    json doc = info_to_json(dataset.info);
    json splits = json::object();
    for (const Split s : kAllSplits) {
        json entries = json::array();
        for (const SampleRecord& rec : dataset.split(s)) {
            json features = json::object();
            for (const Modality m : kAllModalities) {
                if (!rec.features[index_of(m)]) continue;
                const std::string rel = "features/" + rec.sample_id + "." + std::string(to_string(m)) + ".mmft";
                mmft::save(dir / rel, *rec.features[index_of(m)]);
                features[std::string(to_string(m))] = rel;
            }
            json entry = {{"sample_id", rec.sample_id}, {"features", features}};
            if (!std::holds_alternative<std::monostate>(rec.label)) entry["label"] = label_to_json(rec.label);
            entries.push_back(std::move(entry));
        }
        splits[std::string(to_string(s))] = std::move(entries);
    }
    doc["splits"] = std::move(splits);
    const auto path = dir / "manifest.json";
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os << doc.dump(2) << "\n";
    return path;
}

Tensor average_over_time(std::span<const Tensor> sequence) {
    if (sequence.empty()) throw ContractError("average_over_time: empty sequence");
    const Shape shape = sequence[0].shape();
    std::vector<double> acc(sequence[0].size(), 0.0);
    for (const Tensor& step : sequence) {
        if (step.shape() != shape) {
            throw DimensionError("average_over_time: step of shape " + shape_string(step.shape()) +
                                 " in a sequence of " + shape_string(shape));
        }
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += step[i];
    }
    Tensor out(shape);
    const double n = static_cast<double>(sequence.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / n);
    return out;
}

MultiLabel binarize_labels(std::span<const double> values) {
    MultiLabel out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] > 0.0 ? 1 : 0;
    return out;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(seed, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

Batch gather_batch(std::span<const SampleRecord> split, std::span<const std::size_t> indices) {
    Batch batch;
    batch.indices.assign(indices.begin(), indices.end());
    for (const std::size_t i : indices) batch.labels.push_back(split[i].label);
    for (const Modality m : kAllModalities) {
        const std::size_t mi = index_of(m);
        bool present = !indices.empty();
        for (const std::size_t i : indices) present = present && split[i].features[mi].has_value();
        if (!present) continue;
        std::vector<Tensor> rows;
        rows.reserve(indices.size());
        for (const std::size_t i : indices) rows.push_back(*split[i].features[mi]);
        batch.features[mi] = stack_rows(rows);
    }
    return batch;
}

std::vector<Batch> make_batches(std::span<const SampleRecord> split, const BatchOptions& options) {
    if (options.batch_size == 0) throw ConfigError("make_batches: batch_size must be positive");
    if (options.contrastive && options.batch_size < 2) {
        throw ConfigError("make_batches: batch_size must be >= 2 for contrastive methods (no negatives otherwise)");
    }
    const auto order = epoch_permutation(split.size(), options.seed, options.epoch);
    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
        const std::size_t end = std::min(order.size(), start + options.batch_size);
        if (options.drop_last && end - start < options.batch_size) break;
        batches.push_back(gather_batch(split, std::span<const std::size_t>(order).subspan(start, end - start)));
    }
    return batches;
}

}  // namespace mmssl
