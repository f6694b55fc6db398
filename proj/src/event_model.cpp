#include "proxystream/event_model.hpp"

#include "proxystream/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace proxystream {

std::optional<std::size_t> AttributeSpec::category_index(std::string_view label) const {
    auto it = std::find(categories.begin(), categories.end(), label);
    if (it == categories.end()) return std::nullopt;
    return static_cast<std::size_t>(it - categories.begin());
}

AttributeSchema::AttributeSchema(std::vector<AttributeSpec> specs) : specs_(std::move(specs)) {
    for (const auto& s : specs_) {
        if (s.kind == AttributeKind::categorical && s.categories.empty())
            throw SchemaError("categorical attribute '" + s.name + "' has no categories");
    }
}

std::optional<std::size_t> AttributeSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < specs_.size(); ++i)
        if (specs_[i].name == name) return i;
    return std::nullopt;
}

void AttributeSchema::validate(std::span<const double> values) const {
    if (values.size() != specs_.size())
        throw SchemaError("expected " + std::to_string(specs_.size()) + " attributes, got " +
                          std::to_string(values.size()));
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& s = specs_[i];
        const double v = values[i];
        switch (s.kind) {
            case AttributeKind::numeric:
                if (!std::isfinite(v)) throw SchemaError("attribute '" + s.name + "' is not finite");
                break;
            case AttributeKind::categorical:
                if (v < 0 || v != std::floor(v) || v >= static_cast<double>(s.categories.size()))
                    throw SchemaError("attribute '" + s.name + "' has an out-of-range category");
                break;
            case AttributeKind::boolean:
                if (v != 0.0 && v != 1.0) throw SchemaError("attribute '" + s.name + "' is not boolean");
                break;
        }
    }
}

TimeWindow::TimeWindow(double s, double e) : start(s), end(e) {
    if (!(s < e)) throw std::invalid_argument("time window requires start < end");
}

std::optional<ActivityId> EventStore::activity_id(std::string_view label) const {
    auto it = alphabet_index_.find(std::string(label));
    if (it == alphabet_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<EntityId> EventStore::entity_id(std::string_view name) const {
    auto it = entity_index_.find(std::string(name));
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<double> EventStore::start_time(EntityId c) const {
    const auto& positions = by_entity_.at(c);
    if (positions.empty()) return std::nullopt;
    return events_[positions.front()].time;
}

EventStoreBuilder& EventStoreBuilder::set_alphabet(std::vector<std::string> labels) {
    std::set<std::string> unique(labels.begin(), labels.end());
    if (unique.size() != labels.size()) throw SchemaError("alphabet contains duplicate labels");
    alphabet_ = std::move(labels);
    return *this;
}

EventStoreBuilder& EventStoreBuilder::set_event_schema(AttributeSchema schema) {
    event_schema_ = std::move(schema);
    return *this;
}

EventStoreBuilder& EventStoreBuilder::set_entity_schema(AttributeSchema schema) {
    entity_schema_ = std::move(schema);
    return *this;
}

EventStoreBuilder& EventStoreBuilder::set_calendar(Calendar calendar) {
    calendar_ = calendar;
    return *this;
}

EntityId EventStoreBuilder::add_entity(std::string_view name, std::vector<double> attributes) {
    std::string key(name);
    auto it = entity_index_.find(key);
    if (it != entity_index_.end()) {
        if (!attributes.empty()) entity_attributes_[it->second] = std::move(attributes);
        return it->second;
    }
    const auto id = static_cast<EntityId>(entity_names_.size());
    entity_index_.emplace(key, id);
    entity_names_.push_back(std::move(key));
    entity_attributes_.push_back(std::move(attributes));
    return id;
}

void EventStoreBuilder::add_event(std::string_view entity, std::string_view activity, double time,
                                  std::vector<double> attributes) {
    if (!(time >= 0.0) || !std::isfinite(time))
        throw SchemaError("event time must be a finite non-negative number");
    event_schema_.validate(attributes);
    const EntityId id = add_entity(entity);
    pending_.push_back({id, std::string(activity), time, std::move(attributes)});
}

EventStore EventStoreBuilder::build() && {
    EventStore store;
    if (alphabet_) {
        store.alphabet_ = std::move(*alphabet_);
    } else {
        std::set<std::string> seen;
        for (const auto& e : pending_) seen.insert(e.activity);
        store.alphabet_.assign(seen.begin(), seen.end());
    }
    for (std::size_t i = 0; i < store.alphabet_.size(); ++i)
        store.alphabet_index_.emplace(store.alphabet_[i], static_cast<ActivityId>(i));

    for (std::size_t c = 0; c < entity_names_.size(); ++c) {
        if (entity_schema_.empty()) {
            entity_attributes_[c].clear();
            continue;
        }
        try {
            entity_schema_.validate(entity_attributes_[c]);
        } catch (const SchemaError& err) {
            throw SchemaError("entity '" + entity_names_[c] + "': " + err.what());
        }
    }

    std::vector<std::size_t> order(pending_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pending_[a].time < pending_[b].time; });

    store.events_.reserve(pending_.size());
    store.by_entity_.assign(entity_names_.size(), {});
    for (auto idx : order) {
        auto& p = pending_[idx];
        auto act = store.alphabet_index_.find(p.activity);
        if (act == store.alphabet_index_.end())
            throw SchemaError("activity '" + p.activity + "' is not in the alphabet");
        store.by_entity_[p.entity].push_back(static_cast<std::uint32_t>(store.events_.size()));
        store.events_.push_back({p.entity, act->second, p.time, std::move(p.attributes)});
    }

    store.event_schema_ = std::move(event_schema_);
    store.entity_schema_ = std::move(entity_schema_);
    store.entity_names_ = std::move(entity_names_);
    store.entity_index_ = std::move(entity_index_);
    store.entity_attributes_ = std::move(entity_attributes_);
    store.calendar_ = calendar_;
    pending_.clear();
    return store;
}

std::span<const Event> window_slice(const EventStore& store, TimeWindow w) {
    const auto events = store.events();
    auto lo = std::lower_bound(events.begin(), events.end(), w.start,
                               [](const Event& e, double t) { return e.time < t; });
    auto hi = std::lower_bound(lo, events.end(), w.end, [](const Event& e, double t) { return e.time < t; });
    return {lo, hi};
}

namespace {

std::pair<const std::uint32_t*, const std::uint32_t*> entity_range(const EventStore& store, TimeWindow w,
                                                                   EntityId c) {
    const auto positions = store.entity_event_positions(c);
    const auto events = store.events();
    auto lo = std::lower_bound(positions.begin(), positions.end(), w.start,
                               [&](std::uint32_t p, double t) { return events[p].time < t; });
    auto hi = std::lower_bound(lo, positions.end(), w.end,
                               [&](std::uint32_t p, double t) { return events[p].time < t; });
    return {std::to_address(lo), std::to_address(hi)};
}

}  // namespace

std::vector<const Event*> entity_slice(const EventStore& store, TimeWindow w, EntityId c) {
    auto [lo, hi] = entity_range(store, w, c);
    std::vector<const Event*> out;
    out.reserve(static_cast<std::size_t>(hi - lo));
    const auto events = store.events();
    for (auto p = lo; p != hi; ++p) out.push_back(&events[*p]);
    return out;
}

bool has_events_in(const EventStore& store, TimeWindow w, EntityId c) {
    auto [lo, hi] = entity_range(store, w, c);
    return lo != hi;
}

std::vector<double> parikh(std::span<const Event* const> events, std::size_t alphabet_size) {
    std::vector<double> f(alphabet_size, 0.0);
    if (events.empty()) return f;
    for (const Event* e : events) {
        if (e->activity >= alphabet_size) throw SchemaError("activity id outside the alphabet");
        f[e->activity] += 1.0;
    }
    const auto n = static_cast<double>(events.size());
    for (auto& v : f) v /= n;
    return f;
}

std::vector<double> parikh(std::span<const Event> events, std::size_t alphabet_size) {
    std::vector<const Event*> refs;
    refs.reserve(events.size());
    for (const auto& e : events) refs.push_back(&e);
    return parikh(refs, alphabet_size);
}

std::vector<double> parikh(std::span<const std::string> labels, std::span<const std::string> alphabet) {
    std::vector<double> f(alphabet.size(), 0.0);
    if (labels.empty()) return f;
    for (const auto& label : labels) {
        auto it = std::find(alphabet.begin(), alphabet.end(), label);
        if (it == alphabet.end()) throw SchemaError("activity '" + label + "' is not in the alphabet");
        f[static_cast<std::size_t>(it - alphabet.begin())] += 1.0;
    }
    const auto n = static_cast<double>(labels.size());
    for (auto& v : f) v /= n;
    return f;
}

}  // namespace proxystream
