#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace proxystream {

/// Dense index of an entity inside one EventStore (first-appearance order).
using EntityId = std::uint32_t;
/// Index of an activity label inside the store's alphabet.
using ActivityId = std::uint32_t;

enum class AttributeKind { numeric, categorical, boolean };

/// One attribute column. Values are carried as doubles: numeric as-is, categorical as the
/// category's index into `categories`, boolean as 0 or 1.
struct AttributeSpec {
    std::string name;
    AttributeKind kind = AttributeKind::numeric;
    std::vector<std::string> categories;

    std::optional<std::size_t> category_index(std::string_view label) const;
};

class AttributeSchema {
public:
    AttributeSchema() = default;
    explicit AttributeSchema(std::vector<AttributeSpec> specs);

    std::size_t size() const noexcept { return specs_.size(); }
    bool empty() const noexcept { return specs_.empty(); }
    const AttributeSpec& operator[](std::size_t i) const { return specs_[i]; }
    const std::vector<AttributeSpec>& specs() const noexcept { return specs_; }
    std::optional<std::size_t> index_of(std::string_view name) const;

    /// Throws SchemaError naming the offending column.
    void validate(std::span<const double> values) const;

private:
    std::vector<AttributeSpec> specs_;
};

/// Half-open interval [start, end).
struct TimeWindow {
    double start;
    double end;

    TimeWindow(double start, double end);
    bool contains(double t) const noexcept { return start <= t && t < end; }
};

struct Event {
    EntityId entity = 0;
    ActivityId activity = 0;
    double time = 0.0;
    std::vector<double> attributes;
};

/// Maps store time to wall-clock time: epoch_seconds = origin + time * unit_seconds.
struct Calendar {
    std::int64_t origin_epoch_seconds = 0;
    double unit_seconds = 86400.0;
};

/// Frozen, time-ordered event collection plus the per-entity attribute table.
/// Events with equal timestamps keep insertion order.
class EventStore {
public:
    EventStore() = default;

    std::span<const Event> events() const noexcept { return events_; }
    std::size_t size() const noexcept { return events_.size(); }

    const std::vector<std::string>& alphabet() const noexcept { return alphabet_; }
    std::optional<ActivityId> activity_id(std::string_view label) const;

    const AttributeSchema& event_schema() const noexcept { return event_schema_; }
    const AttributeSchema& entity_schema() const noexcept { return entity_schema_; }

    std::size_t entity_count() const noexcept { return entity_names_.size(); }
    const std::string& entity_name(EntityId c) const { return entity_names_.at(c); }
    std::optional<EntityId> entity_id(std::string_view name) const;
    std::span<const double> entity_attributes(EntityId c) const { return entity_attributes_.at(c); }

    /// Positions into events() of entity c's events, in time order.
    std::span<const std::uint32_t> entity_event_positions(EntityId c) const { return by_entity_.at(c); }
    /// Time of the entity's first event; nullopt for an entity without events.
    std::optional<double> start_time(EntityId c) const;

    const std::optional<Calendar>& calendar() const noexcept { return calendar_; }

private:
    friend class EventStoreBuilder;

    std::vector<Event> events_;
    std::vector<std::string> alphabet_;
    std::unordered_map<std::string, ActivityId> alphabet_index_;
    AttributeSchema event_schema_;
    AttributeSchema entity_schema_;
    std::vector<std::string> entity_names_;
    std::unordered_map<std::string, EntityId> entity_index_;
    std::vector<std::vector<double>> entity_attributes_;
    std::vector<std::vector<std::uint32_t>> by_entity_;
    std::optional<Calendar> calendar_;
};

/// Append phase of an EventStore. `build()` validates, sorts stably by time and freezes.
class EventStoreBuilder {
public:
    /// Fixes the alphabet and its order; without it the alphabet is the sorted set of seen labels.
    EventStoreBuilder& set_alphabet(std::vector<std::string> labels);
    EventStoreBuilder& set_event_schema(AttributeSchema schema);
    EventStoreBuilder& set_entity_schema(AttributeSchema schema);
    EventStoreBuilder& set_calendar(Calendar calendar);

    /// Registers an entity (if new) and returns its id. Non-empty attributes replace earlier ones.
    EntityId add_entity(std::string_view name, std::vector<double> attributes = {});
    void add_event(std::string_view entity, std::string_view activity, double time,
                   std::vector<double> attributes = {});

    std::size_t event_count() const noexcept { return pending_.size(); }

    EventStore build() &&;

private:
    struct PendingEvent {
        EntityId entity;
        std::string activity;
        double time;
        std::vector<double> attributes;
    };

    std::optional<std::vector<std::string>> alphabet_;
    AttributeSchema event_schema_;
    AttributeSchema entity_schema_;
    std::optional<Calendar> calendar_;
    std::vector<std::string> entity_names_;
    std::unordered_map<std::string, EntityId> entity_index_;
    std::vector<std::vector<double>> entity_attributes_;
    std::vector<PendingEvent> pending_;
};

/// Events e with w.start <= e.time < w.end, in time order.
std::span<const Event> window_slice(const EventStore& store, TimeWindow w);

/// window_slice filtered to one entity, order preserved.
std::vector<const Event*> entity_slice(const EventStore& store, TimeWindow w, EntityId c);

/// True when entity c has at least one event inside w.
bool has_events_in(const EventStore& store, TimeWindow w, EntityId c);

/// Relative activity frequencies over an alphabet of `alphabet_size` labels (index order).
/// Returns all zeros for an empty input; throws SchemaError on an out-of-alphabet id.
std::vector<double> parikh(std::span<const Event* const> events, std::size_t alphabet_size);
std::vector<double> parikh(std::span<const Event> events, std::size_t alphabet_size);
std::vector<double> parikh(std::span<const std::string> labels, std::span<const std::string> alphabet);

}  // namespace proxystream
