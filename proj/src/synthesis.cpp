#include "guardforge/synthesis.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include "guardforge/util.hpp"

namespace guardforge {

namespace {

std::string pad_index(std::size_t i) {
    std::ostringstream os;
    os.width(6);
    os.fill('0');
    os << i;
    return os.str();
}

// Raw dataset cells can be strings, numbers, or booleans; everything is
// squeezed to a string before the value map and label canonicalization.
std::string cell_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number()) return std::to_string(v.get<double>());
    if (v.is_null()) return {};
    return v.dump();
}

// Minimal RFC 4180 reader: quoted fields may contain commas, newlines, and
// doubled quotes. Rows are vectors of cells; the first row is the header.
std::vector<std::vector<std::string>> parse_csv(const std::string& content,
                                                const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool cell_started = false;

    auto end_cell = [&] {
        row.push_back(cell);
        cell.clear();
        cell_started = false;
    };
    auto end_row = [&] {
        end_cell();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!cell.empty()) {
                throw Error(ErrorKind::SchemaMismatch,
                            path + ": quote inside unquoted cell near row " +
                                std::to_string(rows.size() + 1));
            }
            in_quotes = true;
            cell_started = true;
            break;
        case ',':
            end_cell();
            break;
        case '\r':
            if (i + 1 < content.size() && content[i + 1] == '\n') ++i;
            end_row();
            break;
        case '\n':
            end_row();
            break;
        default:
            cell += c;
            cell_started = true;
            break;
        }
    }
    if (in_quotes) {
        throw Error(ErrorKind::SchemaMismatch, path + ": unterminated quoted cell");
    }
    if (cell_started || !row.empty() || !cell.empty()) end_row();
    // A trailing fully blank row (common from a final newline plus spaces) is
    // dropped.
    while (!rows.empty() && rows.back().size() == 1 && trim(rows.back()[0]).empty()) {
        rows.pop_back();
    }
    return rows;
}

Label cell_to_label(std::string raw, TaskKind task, const FieldMap& fm, const std::string& where) {
    if (trim(raw).empty()) return Label::Absent;
    if (auto it = fm.value_map.find(trim(raw)); it != fm.value_map.end()) raw = it->second;
    try {
        return canonicalize_label(raw, task);
    } catch (const Error&) {
        throw Error(ErrorKind::SchemaMismatch,
                    where + ": unmappable " + task_name(task) + " value '" + raw + "'");
    }
}

Sample normalize_row(const std::map<std::string, std::string>& row, std::size_t index,
                     const FieldMap& fm, const std::string& where) {
    Sample s;
    s.id = fm.source + "-" + pad_index(index);
    s.source = fm.source;
    s.adversarial = fm.adversarial;

    auto pit = row.find(fm.prompt_field);
    if (pit == row.end()) {
        throw Error(ErrorKind::SchemaMismatch,
                    where + ": missing prompt field '" + fm.prompt_field + "'");
    }
    s.prompt = pit->second;
    if (trim(s.prompt).empty()) {
        throw Error(ErrorKind::SchemaMismatch, where + ": empty prompt");
    }

    if (!fm.response_field.empty()) {
        if (auto rit = row.find(fm.response_field); rit != row.end()) s.response = rit->second;
    }

    for (const auto& [task, field] : fm.label_fields) {
        auto lit = row.find(field);
        if (lit == row.end()) continue;
        Label label = cell_to_label(lit->second, task, fm, where);
        if (label == Label::Absent) continue;
        if ((task == TaskKind::ResponseHarm || task == TaskKind::Refusal) && !s.has_response()) {
            throw Error(ErrorKind::SchemaMismatch,
                        where + ": " + std::string(task_name(task)) +
                            " annotated but row has no response");
        }
        s.gold[task] = label;
    }
    return s;
}

} // namespace

std::vector<ChatMessage> build_synthesis_prompt(const Sample& sample, const std::string& tpl) {
    if (trim(tpl).empty()) {
        throw Error(ErrorKind::InvalidArgument, "synthesis template is empty");
    }
    if (sample.annotated_tasks().empty()) {
        throw Error(ErrorKind::MissingGold, sample.id + " has no gold labels");
    }
    const std::string answers = render_answer_block(sample.gold);

    std::string filled = tpl;
    auto replace_all = [&](const std::string& placeholder, const std::string& value,
                           bool required) {
        bool seen = false;
        std::size_t pos = 0;
        while ((pos = filled.find(placeholder, pos)) != std::string::npos) {
            filled.replace(pos, placeholder.size(), value);
            pos += value.size();
            seen = true;
        }
        if (required && !seen) {
            throw Error(ErrorKind::InvalidArgument,
                        "synthesis template lacks " + placeholder);
        }
    };
    replace_all("{prompt}", sample.prompt, true);
    replace_all("{response}", sample.has_response() ? sample.response : "None", false);
    replace_all("{gold_answers}", answers, true);

    return {ChatMessage{"user", filled}};
}

TraceValidation validate_trace(const SynthesizedRecord& rec, const ParserConfig& pc) {
    TraceValidation result;
    auto fail = [&](const std::string& check, const std::string& detail) {
        result.valid = false;
        result.violations.push_back(check + ": " + detail);
    };

    if (rec.steps.empty()) {
        fail("structure", "no reasoning steps");
        return result;
    }

    ReasoningTrace trace;
    try {
        trace = ReasoningTrace::make(rec.steps);
    } catch (const Error& e) {
        fail("structure", e.what());
        return result;
    }

    if (rec.sample.annotated_tasks().empty()) {
        fail("consistency", "record has no gold labels");
        return result;
    }

    Verdict as_verdict;
    try {
        as_verdict = make_verdict(trace, rec.sample.gold);
    } catch (const Error& e) {
        fail("consistency", e.what());
        return result;
    }

    RawModelOutput raw;
    raw.text = render_output(as_verdict, pc.tpl);
    ParseOutcome outcome = parse_output(raw, pc);
    if (!outcome.is_verdict()) {
        fail("structure", "rendered trace does not parse back to a verdict");
        return result;
    }
    for (TaskKind task : kAllTasks) {
        if (outcome.verdict->label_for(task) != rec.sample.gold_for(task)) {
            fail("consistency",
                 std::string(task_name(task)) + " answer does not round-trip to gold");
        }
    }
    if (outcome.verdict->trace.steps() != trace.steps()) {
        fail("structure", "step texts do not survive a render/parse round trip");
    }
    return result;
}

CorpusStats corpus_stats(const std::vector<SynthesizedRecord>& records) {
    if (records.empty()) {
        throw Error(ErrorKind::EmptyCorpus, "corpus_stats over empty corpus");
    }
    CorpusStats stats;
    stats.n_samples = static_cast<std::int64_t>(records.size());
    std::int64_t total_chars = 0;
    for (const auto& rec : records) {
        stats.n_steps += static_cast<std::int64_t>(rec.steps.size());
        for (const auto& step : rec.steps) {
            // Steps are UTF-8; length counts code points, not bytes.
            for (unsigned char c : step) {
                total_chars += (c & 0xC0) != 0x80;
            }
        }
    }
    stats.mean_steps =
        static_cast<double>(stats.n_steps) / static_cast<double>(stats.n_samples);
    stats.mean_len_per_step =
        stats.n_steps == 0
            ? 0.0
            : static_cast<double>(total_chars) / static_cast<double>(stats.n_steps);
    return stats;
}

FieldMap field_map_from_json(const json& j) {
    FieldMap fm;
    try {
        fm.source = j.at("source").get<std::string>();
        fm.prompt_field = j.at("prompt_field").get<std::string>();
        if (j.contains("response_field")) {
            fm.response_field = j["response_field"].get<std::string>();
        }
        if (j.contains("label_fields")) {
            for (const auto& [name, field] : j["label_fields"].items()) {
                auto task = task_from_name(name);
                if (!task) {
                    throw Error(ErrorKind::SchemaMismatch,
                                "field map names unknown task '" + name + "'");
                }
                fm.label_fields[*task] = field.get<std::string>();
            }
        }
        if (j.contains("value_map")) {
            for (const auto& [raw, mapped] : j["value_map"].items()) {
                fm.value_map[raw] = mapped.get<std::string>();
            }
        }
        fm.adversarial = j.value("adversarial", false);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaMismatch, std::string("bad field map: ") + e.what());
    }
    if (fm.source.empty() || fm.prompt_field.empty()) {
        throw Error(ErrorKind::SchemaMismatch, "field map needs source and prompt_field");
    }
    return fm;
}

std::vector<Sample> ingest_seed(const std::string& path, SeedFormat format, const FieldMap& fm) {
    std::vector<Sample> out;
    if (format == SeedFormat::Jsonl) {
        const auto records = read_jsonl(path);
        for (std::size_t i = 0; i < records.size(); ++i) {
            const std::string where = path + ":" + std::to_string(i + 1);
            std::map<std::string, std::string> row;
            for (const auto& [key, value] : records[i].items()) {
                row[key] = cell_to_string(value);
            }
            out.push_back(normalize_row(row, i, fm, where));
        }
        return out;
    }

    const auto rows = parse_csv(read_file(path), path);
    if (rows.empty()) {
        throw Error(ErrorKind::SchemaMismatch, path + ": csv has no header row");
    }
    const auto& header = rows[0];
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string where = path + ":" + std::to_string(r + 1);
        if (rows[r].size() > header.size()) {
            throw Error(ErrorKind::SchemaMismatch, where + ": more cells than header columns");
        }
        std::map<std::string, std::string> row;
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            row[header[c]] = rows[r][c];
        }
        out.push_back(normalize_row(row, r - 1, fm, where));
    }
    return out;
}

SynthOutcome run_synthesis(const std::vector<Sample>& seeds, const ChatClient& client,
                           const SynthConfig& cfg,
                           const std::vector<SynthesizedRecord>& existing) {
    if (trim(cfg.template_text).empty()) {
        throw Error(ErrorKind::InvalidArgument, "synthesis template is empty");
    }
    std::map<std::string, const SynthesizedRecord*> done;
    for (const auto& rec : existing) done[rec.sample.id] = &rec;

    std::vector<std::optional<SynthesizedRecord>> slots(seeds.size());
    std::mutex dropped_mu;
    std::vector<std::string> dropped;
    std::atomic<int> requests{0};

    parallel_for(seeds.size(), static_cast<std::size_t>(client.config().max_inflight),
                 [&](std::size_t i) {
                     const Sample& s = seeds[i];
                     if (auto it = done.find(s.id); it != done.end()) {
                         slots[i] = *it->second;
                         return;
                     }
                     const auto messages = build_synthesis_prompt(s, cfg.template_text);
                     std::string last_reason = "no attempt made";
                     for (int attempt = 0; attempt <= cfg.max_invalid_retries; ++attempt) {
                         CompletionRequest req;
                         req.messages = messages;
                         req.temperature = cfg.temperature;
                         req.top_p = cfg.top_p;
                         req.n = 1;
                         req.seed = derive_seed(cfg.seed, s.id,
                                                static_cast<std::uint64_t>(attempt));
                         req.sample_tag = s.id;
                         ChatResult res = client.chat_complete(req);
                         requests.fetch_add(1);

                         RawModelOutput raw;
                         raw.text = res.choices[0].text;
                         raw.finish_reason = res.choices[0].finish_reason;
                         raw.model_id = res.model;
                         raw.temperature = cfg.temperature;
                         raw.top_p = cfg.top_p;
                         raw.seed = req.seed;
                         ParseOutcome outcome = parse_output(raw);
                         if (!outcome.is_verdict()) {
                             last_reason = outcome.is_rejection()
                                               ? "synthesizer rejected the request"
                                               : outcome.failure_reason;
                             continue;
                         }

                         SynthesizedRecord rec;
                         rec.sample = s;
                         rec.steps = outcome.verdict->trace.steps();
                         rec.synthesizer_model =
                             res.model.empty() ? client.config().model : res.model;
                         TraceValidation v = validate_trace(rec);
                         if (v.valid) {
                             rec.validated = true;
                             slots[i] = std::move(rec);
                             return;
                         }
                         last_reason = v.violations.front();
                     }
                     std::lock_guard<std::mutex> lk(dropped_mu);
                     dropped.push_back(s.id + ": " + last_reason);
                 });

    SynthOutcome out;
    out.requests_made = requests.load();
    for (auto& slot : slots) {
        if (slot) out.records.push_back(std::move(*slot));
    }
    std::sort(out.records.begin(), out.records.end(),
              [](const SynthesizedRecord& a, const SynthesizedRecord& b) {
                  return a.sample.id < b.sample.id;
              });
    std::sort(dropped.begin(), dropped.end());
    out.dropped = std::move(dropped);
    return out;
}

json synthesized_to_json(const SynthesizedRecord& rec) {
    json j = sample_to_json(rec.sample);
    j["steps"] = rec.steps;
    j["synthesizer_model"] = rec.synthesizer_model;
    j["validated"] = rec.validated;
    return j;
}

SynthesizedRecord synthesized_from_json(const json& j) {
    SynthesizedRecord rec;
    rec.sample = sample_from_json(j);
    try {
        rec.steps = j.at("steps").get<std::vector<std::string>>();
        rec.synthesizer_model = j.value("synthesizer_model", "");
        rec.validated = j.value("validated", false);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaMismatch,
                    std::string("bad synthesized record: ") + e.what());
    }
    return rec;
}

} // namespace guardforge
