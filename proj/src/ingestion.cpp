#include "proxystream/ingestion.hpp"

#include "proxystream/csv.hpp"
#include "proxystream/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace proxystream {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

AttributeKind parse_kind(const std::string& s) {
    if (s == "numeric") return AttributeKind::numeric;
    if (s == "categorical") return AttributeKind::categorical;
    if (s == "boolean") return AttributeKind::boolean;
    throw SchemaError("unknown attribute kind '" + s + "'");
}

std::string kind_name(AttributeKind k) {
    switch (k) {
        case AttributeKind::numeric: return "numeric";
        case AttributeKind::categorical: return "categorical";
        case AttributeKind::boolean: return "boolean";
    }
    return "numeric";
}

std::vector<ColumnBinding> bindings_from_json(const nlohmann::json& arr) {
    std::vector<ColumnBinding> out;
    for (const auto& b : arr) {
        ColumnBinding cb;
        cb.column = b.at("column").get<std::string>();
        cb.spec.name = b.value("name", cb.column);
        cb.spec.kind = parse_kind(b.value("kind", std::string("numeric")));
        if (b.contains("categories")) cb.spec.categories = b.at("categories").get<std::vector<std::string>>();
        out.push_back(std::move(cb));
    }
    return out;
}

nlohmann::json bindings_to_json(const std::vector<ColumnBinding>& bindings) {
    auto arr = nlohmann::json::array();
    for (const auto& b : bindings) {
        nlohmann::json j{{"column", b.column}, {"name", b.spec.name}, {"kind", kind_name(b.spec.kind)}};
        if (b.spec.kind == AttributeKind::categorical) j["categories"] = b.spec.categories;
        arr.push_back(std::move(j));
    }
    return arr;
}

std::optional<double> parse_bool(std::string_view text) {
    const auto s = lower(text);
    if (s == "true" || s == "1" || s == "yes") return 1.0;
    if (s == "false" || s == "0" || s == "no") return 0.0;
    return std::nullopt;
}

std::vector<ColumnBinding> bindings_for(const AttributeSchema& schema) {
    std::vector<ColumnBinding> out;
    for (const auto& s : schema.specs()) out.push_back({s.name, s});
    return out;
}

}  // namespace

LogSchema LogSchema::from_json(const nlohmann::json& j) {
    LogSchema s;
    s.entity_column = j.value("entity_column", s.entity_column);
    s.activity_column = j.value("activity_column", s.activity_column);
    s.timestamp_column = j.value("timestamp_column", s.timestamp_column);
    const auto fmt = j.value("timestamp_format", std::string("numeric"));
    if (fmt == "numeric")
        s.timestamp_format = TimestampFormat::numeric;
    else if (fmt == "iso8601")
        s.timestamp_format = TimestampFormat::iso8601;
    else if (fmt == "day_month_year")
        s.timestamp_format = TimestampFormat::day_month_year;
    else
        throw SchemaError("unknown timestamp_format '" + fmt + "'");
    s.unit_seconds = j.value("unit_seconds", s.unit_seconds);
    if (!(s.unit_seconds > 0)) throw SchemaError("unit_seconds must be positive");
    if (j.contains("origin")) {
        const auto& o = j.at("origin");
        if (o.is_number()) {
            s.origin_epoch_seconds = o.get<std::int64_t>();
        } else {
            auto parsed = csv::parse_iso8601(o.get<std::string>());
            if (!parsed) throw SchemaError("origin is not an ISO-8601 timestamp");
            s.origin_epoch_seconds = static_cast<std::int64_t>(std::floor(*parsed));
        }
    }
    if (j.contains("event_attributes")) s.event_attributes = bindings_from_json(j.at("event_attributes"));
    if (j.contains("entity_attributes")) s.entity_attributes = bindings_from_json(j.at("entity_attributes"));
    if (j.contains("alphabet")) s.alphabet = j.at("alphabet").get<std::vector<std::string>>();
    return s;
}

nlohmann::json LogSchema::to_json() const {
    nlohmann::json j;
    j["entity_column"] = entity_column;
    j["activity_column"] = activity_column;
    j["timestamp_column"] = timestamp_column;
    j["timestamp_format"] = timestamp_format == TimestampFormat::numeric   ? "numeric"
                            : timestamp_format == TimestampFormat::iso8601 ? "iso8601"
                                                                           : "day_month_year";
    j["unit_seconds"] = unit_seconds;
    if (origin_epoch_seconds) j["origin"] = csv::format_iso8601(static_cast<double>(*origin_epoch_seconds));
    j["event_attributes"] = bindings_to_json(event_attributes);
    j["entity_attributes"] = bindings_to_json(entity_attributes);
    if (alphabet) j["alphabet"] = *alphabet;
    return j;
}

LogSchema LogSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema file " + path.string());
    return from_json(nlohmann::json::parse(in));
}

LogSchema canonical_schema(const EventStore& store) {
    LogSchema s;
    s.timestamp_format = TimestampFormat::numeric;
    if (store.calendar()) {
        s.unit_seconds = store.calendar()->unit_seconds;
        s.origin_epoch_seconds = store.calendar()->origin_epoch_seconds;
    }
    s.event_attributes = bindings_for(store.event_schema());
    s.entity_attributes = bindings_for(store.entity_schema());
    s.alphabet = store.alphabet();
    return s;
}

const std::vector<std::string>& invoice_attribute_names() {
    static const std::vector<std::string> names{
        "Company",        "Document Type", "GR-Based Inv. Verif.", "Goods Receipt",
        "Item Category",  "Item Type",     "Spend area text",      "Spend classification text"};
    return names;
}

LogSchema bpic2019_schema() {
    LogSchema s;
    s.entity_column = "case concept:name";
    s.activity_column = "event concept:name";
    s.timestamp_column = "event time:timestamp";
    s.timestamp_format = TimestampFormat::day_month_year;
    s.unit_seconds = 86400.0;
    for (const auto& name : invoice_attribute_names()) {
        const bool flag = name == "GR-Based Inv. Verif." || name == "Goods Receipt";
        s.entity_attributes.push_back(
            {"case " + name, AttributeSpec{name, flag ? AttributeKind::boolean : AttributeKind::categorical, {}}});
    }
    return s;
}

EventStore read_event_log(const std::filesystem::path& path, const LogSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open event log " + path.string());
    return read_event_log(in, schema);
}

EventStore read_event_log(std::istream& in, const LogSchema& schema) {
    std::string record;
    if (!csv::read_record(in, record)) throw ParseError("missing header", 1);
    auto header = csv::split_line(record);
    if (!header.empty() && header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
        header[0].erase(0, 3);

    auto column = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto entity_col = column(schema.entity_column);
    const auto activity_col = column(schema.activity_column);
    const auto time_col = column(schema.timestamp_column);
    std::vector<std::size_t> event_cols, entity_cols;
    for (const auto& b : schema.event_attributes) event_cols.push_back(column(b.column));
    for (const auto& b : schema.entity_attributes) entity_cols.push_back(column(b.column));

    struct Row {
        std::vector<std::string> fields;
        double stamp;
        std::size_t line;
    };
    std::vector<Row> rows;
    std::size_t line = 1;
    while (csv::read_record(in, record)) {
        ++line;
        if (record.empty() || record == "\r") continue;
        auto fields = csv::split_line(record);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             line);
        const auto& ts = fields[time_col];
        std::optional<double> stamp;
        switch (schema.timestamp_format) {
            case TimestampFormat::numeric: stamp = csv::parse_double(ts); break;
            case TimestampFormat::iso8601: stamp = csv::parse_iso8601(ts); break;
            case TimestampFormat::day_month_year: stamp = csv::parse_day_month_year(ts); break;
        }
        if (!stamp) throw ParseError("bad timestamp '" + ts + "' in column '" + schema.timestamp_column + "'", line);
        rows.push_back({std::move(fields), *stamp, line});
    }

    // Scan pass: close open categorical lists.
    auto close_specs = [&](const std::vector<ColumnBinding>& bindings, const std::vector<std::size_t>& cols) {
        std::vector<AttributeSpec> specs;
        for (std::size_t i = 0; i < bindings.size(); ++i) {
            AttributeSpec spec = bindings[i].spec;
            if (spec.kind == AttributeKind::categorical && spec.categories.empty()) {
                std::set<std::string> seen;
                for (const auto& r : rows) seen.insert(r.fields[cols[i]]);
                spec.categories.assign(seen.begin(), seen.end());
                if (spec.categories.empty()) spec.categories.push_back("");
            }
            specs.push_back(std::move(spec));
        }
        return specs;
    };
    const AttributeSchema event_schema(close_specs(schema.event_attributes, event_cols));
    const AttributeSchema entity_schema(close_specs(schema.entity_attributes, entity_cols));

    auto convert = [&](const AttributeSchema& s, const std::vector<std::size_t>& cols, const Row& r,
                       const std::vector<ColumnBinding>& bindings) {
        std::vector<double> values;
        values.reserve(cols.size());
        for (std::size_t i = 0; i < cols.size(); ++i) {
            const auto& text = r.fields[cols[i]];
            const auto& spec = s[i];
            switch (spec.kind) {
                case AttributeKind::numeric: {
                    auto v = csv::parse_double(text);
                    if (!v) throw ParseError("bad number '" + text + "' in column '" + bindings[i].column + "'", r.line);
                    values.push_back(*v);
                    break;
                }
                case AttributeKind::categorical: {
                    auto idx = spec.category_index(text);
                    if (!idx)
                        throw SchemaError("row " + std::to_string(r.line) + ": unknown category '" + text +
                                          "' in column '" + bindings[i].column + "'");
                    values.push_back(static_cast<double>(*idx));
                    break;
                }
                case AttributeKind::boolean: {
                    auto v = parse_bool(text);
                    if (!v)
                        throw SchemaError("row " + std::to_string(r.line) + ": non-boolean '" + text +
                                          "' in column '" + bindings[i].column + "'");
                    values.push_back(*v);
                    break;
                }
            }
        }
        return values;
    };

    std::optional<std::int64_t> origin = schema.origin_epoch_seconds;
    const bool calendar_format = schema.timestamp_format != TimestampFormat::numeric;
    if (calendar_format && !origin) {
        double earliest = 0;
        for (std::size_t i = 0; i < rows.size(); ++i)
            earliest = i == 0 ? rows[i].stamp : std::min(earliest, rows[i].stamp);
        origin = static_cast<std::int64_t>(std::floor(earliest / 86400.0)) * 86400;
    }

    EventStoreBuilder builder;
    builder.set_event_schema(event_schema).set_entity_schema(entity_schema);
    if (schema.alphabet) builder.set_alphabet(*schema.alphabet);
    if (origin) builder.set_calendar({*origin, schema.unit_seconds});

    std::set<std::string> have_attributes;
    for (const auto& r : rows) {
        const auto& entity = r.fields[entity_col];
        if (!entity_schema.empty() && !have_attributes.count(entity)) {
            builder.add_entity(entity, convert(entity_schema, entity_cols, r, schema.entity_attributes));
            have_attributes.insert(entity);
        }
        double time = r.stamp;
        if (calendar_format) time = (r.stamp - static_cast<double>(*origin)) / schema.unit_seconds;
        try {
            builder.add_event(entity, r.fields[activity_col], time,
                              convert(event_schema, event_cols, r, schema.event_attributes));
        } catch (const SchemaError& err) {
            throw SchemaError("row " + std::to_string(r.line) + ": " + err.what());
        }
    }
    return std::move(builder).build();
}

void write_event_log(const EventStore& store, std::ostream& out) {
    const auto& ev_schema = store.event_schema();
    const auto& en_schema = store.entity_schema();
    std::vector<std::string> header{"entity_id", "activity", "timestamp"};
    for (const auto& s : ev_schema.specs()) header.push_back(s.name);
    for (const auto& s : en_schema.specs()) header.push_back(s.name);
    out << csv::join(header) << '\n';

    auto render = [](const AttributeSpec& spec, double v) -> std::string {
        switch (spec.kind) {
            case AttributeKind::numeric: return csv::format_double(v);
            case AttributeKind::categorical: return spec.categories.at(static_cast<std::size_t>(v));
            case AttributeKind::boolean: return v != 0.0 ? "true" : "false";
        }
        return {};
    };

    std::vector<std::string> fields;
    for (const auto& e : store.events()) {
        fields.clear();
        fields.push_back(store.entity_name(e.entity));
        fields.push_back(store.alphabet()[e.activity]);
        fields.push_back(csv::format_double(e.time));
        for (std::size_t i = 0; i < ev_schema.size(); ++i) fields.push_back(render(ev_schema[i], e.attributes[i]));
        const auto attrs = store.entity_attributes(e.entity);
        for (std::size_t i = 0; i < en_schema.size(); ++i) fields.push_back(render(en_schema[i], attrs[i]));
        out << csv::join(fields) << '\n';
    }
}

void write_event_log(const EventStore& store, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_event_log(store, out);
}

nlohmann::json FilterReport::to_json() const {
    return {{"cases_in", cases_in},
            {"cases_kept", cases_kept},
            {"cases_dropped_by_rule",
             {{"multiplicity", dropped_multiplicity}, {"order", dropped_order}, {"date_range", dropped_date_range}}},
            {"events_kept", events_kept},
            {"labels_kept", labels_kept}};
}

std::pair<EventStore, FilterReport> filter_invoice_cases(const EventStore& store, const FilterRules& rules) {
    if (!store.calendar()) throw ContractError("invoice filter needs timestamps anchored to a calendar");
    const Calendar cal = *store.calendar();
    const auto year_start = csv::epoch_seconds(rules.year, 1, 1);
    const auto year_end = csv::epoch_seconds(rules.year + 1, 1, 1);
    auto to_epoch = [&](double t) { return static_cast<double>(cal.origin_epoch_seconds) + t * cal.unit_seconds; };

    std::vector<bool> is_vci(store.alphabet().size()), is_rir(store.alphabet().size());
    const auto vci_key = lower(rules.vci_label), rir_key = lower(rules.rir_label);
    for (std::size_t a = 0; a < store.alphabet().size(); ++a) {
        const auto key = lower(store.alphabet()[a]);
        is_vci[a] = key == vci_key;
        is_rir[a] = key == rir_key;
    }

    FilterReport report;
    report.cases_in = store.entity_count();
    std::vector<bool> keep(store.entity_count(), false);
    const auto events = store.events();
    for (EntityId c = 0; c < store.entity_count(); ++c) {
        const auto positions = store.entity_event_positions(c);
        std::size_t n_vci = 0, n_rir = 0;
        double t_vci = 0, t_rir = 0;
        for (auto p : positions) {
            const auto& e = events[p];
            if (is_vci[e.activity]) ++n_vci, t_vci = e.time;
            if (is_rir[e.activity]) ++n_rir, t_rir = e.time;
        }
        if (n_vci != 1 || n_rir != 1) {
            ++report.dropped_multiplicity;
        } else if (!(t_vci < t_rir)) {
            ++report.dropped_order;
        } else if (to_epoch(events[positions.front()].time) < static_cast<double>(year_start) ||
                   to_epoch(events[positions.back()].time) >= static_cast<double>(year_end)) {
            ++report.dropped_date_range;
        } else {
            keep[c] = true;
            ++report.cases_kept;
        }
    }

    // Attribute restriction, with category lists narrowed to what the kept cases use.
    const auto& in_schema = store.entity_schema();
    std::vector<std::size_t> kept_cols;
    std::vector<AttributeSpec> out_specs;
    std::vector<std::vector<int>> remap;
    for (const auto& name : rules.keep_attributes) {
        auto idx = in_schema.index_of(name);
        if (!idx) continue;
        kept_cols.push_back(*idx);
        AttributeSpec spec = in_schema[*idx];
        std::vector<int> map;
        if (spec.kind == AttributeKind::categorical) {
            std::vector<bool> used(spec.categories.size(), false);
            for (EntityId c = 0; c < store.entity_count(); ++c)
                if (keep[c]) used[static_cast<std::size_t>(store.entity_attributes(c)[*idx])] = true;
            std::vector<std::string> cats;
            map.assign(spec.categories.size(), -1);
            for (std::size_t k = 0; k < used.size(); ++k)
                if (used[k]) map[k] = static_cast<int>(cats.size()), cats.push_back(spec.categories[k]);
            if (cats.empty()) cats = spec.categories, map.clear();
            spec.categories = std::move(cats);
        }
        remap.push_back(std::move(map));
        out_specs.push_back(std::move(spec));
    }

    EventStoreBuilder builder;
    builder.set_event_schema(store.event_schema());
    builder.set_entity_schema(AttributeSchema(out_specs));
    builder.set_calendar({year_start, cal.unit_seconds});
    for (EntityId c = 0; c < store.entity_count(); ++c) {
        if (!keep[c]) continue;
        std::vector<double> attrs;
        const auto src = store.entity_attributes(c);
        for (std::size_t i = 0; i < kept_cols.size(); ++i) {
            double v = src[kept_cols[i]];
            if (!remap[i].empty()) v = remap[i][static_cast<std::size_t>(v)];
            attrs.push_back(v);
        }
        builder.add_entity(store.entity_name(c), std::move(attrs));
    }
    const bool same_frame = cal.origin_epoch_seconds == year_start;
    for (const auto& e : events) {
        if (!keep[e.entity]) continue;
        double t = same_frame ? e.time : (to_epoch(e.time) - static_cast<double>(year_start)) / cal.unit_seconds;
        // Marker spellings are unified so downstream label lookups see one VCI and one RIR label.
        const std::string& label = is_vci[e.activity]   ? rules.vci_label
                                   : is_rir[e.activity] ? rules.rir_label
                                                        : store.alphabet()[e.activity];
        builder.add_event(store.entity_name(e.entity), label, std::max(t, 0.0), e.attributes);
        ++report.events_kept;
    }
    auto out = std::move(builder).build();
    report.labels_kept = out.alphabet().size();
    return {std::move(out), report};
}

}  // namespace proxystream
