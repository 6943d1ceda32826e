#include "dms/identity.hpp"

#include "dms/error.hpp"
#include "dms/text.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace dms {

namespace {

constexpr std::string_view kDbMagic = "dms-identity-db";
constexpr std::string_view kDbVersion = "v1";

// Cursor over one record line; names may contain spaces so the line is not
// pre-tokenised.
class RecordCursor {
public:
    RecordCursor(std::string_view line, std::string where) : line_(line), where_(std::move(where)) {}

    std::string_view token() {
        while (pos_ < line_.size() && line_[pos_] == ' ') ++pos_;
        const std::size_t start = pos_;
        while (pos_ < line_.size() && line_[pos_] != ' ') ++pos_;
        if (pos_ == start) fail("unexpected end of record");
        return line_.substr(start, pos_ - start);
    }

    std::string name() {
        while (pos_ < line_.size() && line_[pos_] == ' ') ++pos_;
        const std::size_t colon = line_.find(':', pos_);
        if (colon == std::string_view::npos) fail("name must be written as <len>:<name>");
        const auto len = text::parse_uint(line_.substr(pos_, colon - pos_), "name length");
        if (colon + 1 + len > line_.size()) fail("name runs past end of line");
        std::string out(line_.substr(colon + 1, len));
        pos_ = colon + 1 + len;
        return out;
    }

    bool at_end() {
        while (pos_ < line_.size() && line_[pos_] == ' ') ++pos_;
        return pos_ == line_.size();
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(where_ + ": " + what); }

private:
    std::string_view line_;
    std::string where_;
    std::size_t pos_ = 0;
};

std::optional<ModalityTemplate> read_template(RecordCursor& c, int dim) {
    const auto flag = c.token();
    const auto count = text::parse_int(c.token(), "image count");
    if (flag == "0") {
        if (count != 0) c.fail("absent modality must have count 0");
        return std::nullopt;
    }
    if (flag != "1") c.fail("presence flag must be 0 or 1");
    if (count < 1) c.fail("present modality needs count >= 1");
    ModalityTemplate t;
    t.count = count;
    t.mean.reserve(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) t.mean.push_back(text::parse_double(c.token(), "embedding value"));
    return t;
}

void write_template(std::string& out, const std::optional<ModalityTemplate>& t) {
    if (!t) {
        out += " 0 0";
        return;
    }
    out += " 1 " + std::to_string(t->count);
    for (double v : t->mean) {
        out += ' ';
        out += text::format_g17(v);
    }
}

std::vector<double> batch_mean(const std::vector<const Embedding*>& items, std::size_t dim) {
    std::vector<double> sum(dim, 0.0);
    for (const Embedding* e : items) {
        for (std::size_t i = 0; i < dim; ++i) sum[i] += e->values[i];
    }
    const double n = static_cast<double>(items.size());
    for (double& v : sum) v /= n;
    return sum;
}

} // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("cosine similarity of vectors with " + std::to_string(a.size()) +
                             " and " + std::to_string(b.size()) + " entries");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine similarity is undefined for a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::pair<std::vector<double>, std::int64_t> update_embedding(std::span<const double> stored,
                                                              std::int64_t count,
                                                              std::span<const double> added) {
    if (count < 1) throw InvalidArgument("stored embedding must represent at least one image");
    if (stored.size() != added.size()) {
        throw DimensionError("cannot fold a " + std::to_string(added.size()) +
                             "-dimensional embedding into a " + std::to_string(stored.size()) +
                             "-dimensional mean");
    }
    const double n = static_cast<double>(count);
    const double keep = n / (n + 1.0);
    const double take = 1.0 / (n + 1.0);
    std::vector<double> out(stored.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * stored[i] + take * added[i];
    return {std::move(out), count + 1};
}

// --- database ---

IdentityDatabase::IdentityDatabase(int dim) : dim_(dim), mutex_(std::make_unique<std::shared_mutex>()) {
    if (dim < 1) throw InvalidArgument("embedding dimension must be positive");
}

IdentityDatabase::IdentityDatabase(IdentityDatabase&& other) noexcept
    : dim_(other.dim_),
      records_(std::move(other.records_)),
      next_id_(other.next_id_),
      path_(std::move(other.path_)),
      mutex_(std::make_unique<std::shared_mutex>()) {}

IdentityDatabase& IdentityDatabase::operator=(IdentityDatabase&& other) noexcept {
    dim_ = other.dim_;
    records_ = std::move(other.records_);
    next_id_ = other.next_id_;
    path_ = std::move(other.path_);
    return *this;
}

IdentityDatabase IdentityDatabase::open(const std::filesystem::path& path, int dim) {
    IdentityDatabase db = std::filesystem::exists(path) ? load(path) : IdentityDatabase(dim);
    if (db.dim_ != dim) {
        throw DimensionError(path.string() + " stores " + std::to_string(db.dim_) +
                             "-dimensional embeddings, expected " + std::to_string(dim));
    }
    db.path_ = path;
    return db;
}

IdentityDatabase IdentityDatabase::load(const std::filesystem::path& path) {
    try {
        return parse(text::read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

IdentityDatabase IdentityDatabase::parse(std::string_view content) {
    const auto all = text::lines(content);
    if (all.empty()) throw ParseError("identity db: empty input");
    const auto head = text::tokens(all.front());
    if (head.size() != 4 || head[0] != kDbMagic || head[1] != kDbVersion) {
        throw ParseError("identity db line 1: expected 'dms-identity-db v1 dim=<D> records=<N>'");
    }
    IdentityDatabase db(static_cast<int>(text::parse_int(text::expect_key(head[2], "dim"), "dim")));
    const auto expected = text::parse_uint(text::expect_key(head[3], "records"), "records");
    for (std::size_t ln = 1; ln < all.size(); ++ln) {
        if (all[ln].empty()) continue;
        RecordCursor c(all[ln], "identity db line " + std::to_string(ln + 1));
        IdentityRecord r;
        r.id = text::parse_int(c.token(), "id");
        r.name = c.name();
        r.rgb = read_template(c, db.dim_);
        r.ir = read_template(c, db.dim_);
        if (!c.at_end()) c.fail("trailing fields");
        if (!r.rgb && !r.ir) c.fail("record has no embeddings");
        if (!db.records_.empty() && r.id <= db.records_.back().id) c.fail("ids must be ascending");
        db.next_id_ = r.id + 1;
        db.records_.push_back(std::move(r));
    }
    if (db.records_.size() != expected) {
        throw ParseError("identity db: header declares " + std::to_string(expected) +
                         " records, found " + std::to_string(db.records_.size()));
    }
    return db;
}

std::string IdentityDatabase::serialize_locked() const {
    std::string out = std::string(kDbMagic) + ' ' + std::string(kDbVersion) +
                      " dim=" + std::to_string(dim_) + " records=" + std::to_string(records_.size()) +
                      '\n';
    for (const auto& r : records_) {
        out += std::to_string(r.id) + ' ' + std::to_string(r.name.size()) + ':' + r.name;
        write_template(out, r.rgb);
        write_template(out, r.ir);
        out += '\n';
    }
    return out;
}

std::string IdentityDatabase::serialize() const {
    std::shared_lock lock(*mutex_);
    return serialize_locked();
}

void IdentityDatabase::save(const std::filesystem::path& path) const {
    text::write_file_atomic(path, serialize());
}

void IdentityDatabase::persist_locked() const {
    if (path_) text::write_file_atomic(*path_, serialize_locked());
}

std::size_t IdentityDatabase::size() const {
    std::shared_lock lock(*mutex_);
    return records_.size();
}

std::vector<IdentityRecord> IdentityDatabase::records() const {
    std::shared_lock lock(*mutex_);
    return records_;
}

std::optional<IdentityRecord> IdentityDatabase::find(std::int64_t id) const {
    std::shared_lock lock(*mutex_);
    for (const auto& r : records_) {
        if (r.id == id) return r;
    }
    return std::nullopt;
}

std::optional<std::int64_t> IdentityDatabase::id_of(std::string_view name) const {
    std::shared_lock lock(*mutex_);
    for (const auto& r : records_) {
        if (r.name == name) return r.id;
    }
    return std::nullopt;
}

void IdentityDatabase::check_query(const Embedding& e) const {
    if (e.dim() != static_cast<std::size_t>(dim_)) {
        throw DimensionError("embedding has " + std::to_string(e.dim()) + " entries, database expects " +
                             std::to_string(dim_));
    }
    validate_embedding(e);
}

IdentityRecord& IdentityDatabase::record_locked(std::int64_t id) {
    for (auto& r : records_) {
        if (r.id == id) return r;
    }
    throw IdentityError("unknown identity id " + std::to_string(id));
}

IdentityRecord IdentityDatabase::enroll(std::string name, const std::vector<Embedding>& captures,
                                        std::size_t min_rgb_captures) {
    if (captures.empty()) throw IdentityError("enrollment needs at least one capture");
    if (name.find_first_of("\n\r") != std::string::npos) {
        throw IdentityError("identity names may not contain line breaks");
    }
    std::vector<const Embedding*> rgb, ir;
    for (const auto& c : captures) {
        check_query(c);
        (c.modality == Modality::rgb ? rgb : ir).push_back(&c);
    }
    if (rgb.size() < min_rgb_captures) {
        throw IdentityError("enrollment needs at least " + std::to_string(min_rgb_captures) +
                            " RGB captures, got " + std::to_string(rgb.size()));
    }
    IdentityRecord r;
    r.name = std::move(name);
    const auto d = static_cast<std::size_t>(dim_);
    if (!rgb.empty()) r.rgb = ModalityTemplate{batch_mean(rgb, d), static_cast<std::int64_t>(rgb.size())};
    if (!ir.empty()) r.ir = ModalityTemplate{batch_mean(ir, d), static_cast<std::int64_t>(ir.size())};

    std::unique_lock lock(*mutex_);
    r.id = next_id_++;
    records_.push_back(r);
    persist_locked();
    return r;
}

MatchResult IdentityDatabase::identify(const Embedding& query, const MatchThresholds& thresholds) const {
    check_query(query);
    std::shared_lock lock(*mutex_);
    MatchResult result;
    result.modality = query.modality;
    std::int64_t best_id = 0;
    for (const auto& r : records_) {
        const auto& t = r.get(query.modality);
        if (!t) continue;
        const double s = cosine_similarity(t->mean, query.values);
        if (!result.similarity || s > *result.similarity) {
            result.similarity = s;
            best_id = r.id;
        }
    }
    if (result.similarity && *result.similarity >= thresholds.get(query.modality)) {
        result.matched = true;
        result.id = best_id;
    }
    return result;
}

IdentityRecord IdentityDatabase::auto_register(const Embedding& query, std::string_view name_prefix) {
    check_query(query);
    std::unique_lock lock(*mutex_);
    IdentityRecord r;
    r.id = next_id_++;
    r.name = std::string(name_prefix) + std::to_string(r.id);
    r.get(query.modality) = ModalityTemplate{query.values, 1};
    records_.push_back(r);
    persist_locked();
    return r;
}

IdentityRecord IdentityDatabase::reinforce(std::int64_t id, const Embedding& query) {
    check_query(query);
    std::unique_lock lock(*mutex_);
    IdentityRecord& r = record_locked(id);
    auto& t = r.get(query.modality);
    if (!t) {
        t = ModalityTemplate{query.values, 1};
    } else {
        auto [mean, count] = update_embedding(t->mean, t->count, query.values);
        t->mean = std::move(mean);
        t->count = count;
    }
    persist_locked();
    return r;
}

} // namespace dms
