#include "slg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "slg/csv.hpp"
#include "slg/error.hpp"
#include "slg/rng.hpp"

namespace slg::synth {

std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::device: return "device";
    case EntityType::card_token: return "card_token";
    case EntityType::ship_addr: return "ship_addr";
    case EntityType::ip: return "ip";
  }
  return "?";
}

EntityType parse_entity_type(std::string_view s) {
  for (auto t : kEntityTypes)
    if (to_string(t) == s) return t;
  throw ConfigError("unknown entity type '" + std::string(s) + "'");
}

std::string_view to_string(PaymentKind p) {
  switch (p) {
    case PaymentKind::card: return "card";
    case PaymentKind::wallet: return "wallet";
    case PaymentKind::ratepay: return "ratepay";
    case PaymentKind::bank_transfer: return "bank_transfer";
  }
  return "?";
}

PaymentKind parse_payment_kind(std::string_view s) {
  for (auto p : {PaymentKind::card, PaymentKind::wallet, PaymentKind::ratepay, PaymentKind::bank_transfer})
    if (to_string(p) == s) return p;
  throw ConsistencyError("unknown payment kind '" + std::string(s) + "'");
}

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ConsistencyError("unknown split '" + std::string(s) + "'");
}

std::size_t GeneratorConfig::expected_fraud_count() const {
  return static_cast<std::size_t>(std::llround(fraud_rate * static_cast<double>(n_transactions)));
}

void GeneratorConfig::validate() const {
  auto fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
  };
  fraction(fraud_rate, "fraud_rate");
  fraction(new_buyer_rate, "new_buyer_rate");
  fraction(fraud_new_buyer_rate, "fraud_new_buyer_rate");
  fraction(ratepay_rate, "ratepay_rate");
  fraction(crew_share_prob, "crew_share_prob");
  fraction(train_fraction, "train_fraction");
  for (const auto& [type, p] : entity_share_probs) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError("entity_share_probs." + std::string(to_string(type)) + " must lie in [0,1]");
  }
  if (page_vocab_size < 3) throw ConfigError("page_vocab_size must be >= 3 (PAD plus two real pages)");
  if (page_vocab_size <= static_cast<std::size_t>(kDwellSensitivePages.back()))
    throw ConfigError("page_vocab_size must cover the dwell-sensitive pages");
  if (n_categories < 2) throw ConfigError("n_categories must be >= 2 (PAD plus one real category)");
  if (n_archetypes_good < 1) throw ConfigError("n_archetypes_good must be >= 1");
  if (n_users < 1) throw ConfigError("n_users must be >= 1");
  if (min_events < 2 || max_events < min_events) throw ConfigError("need 2 <= min_events <= max_events");
  if (hub_min_size < 30 || hub_max_size < hub_min_size)
    throw ConfigError("hub entity sizes must satisfy 30 <= hub_min_size <= hub_max_size");
  if (crew_size < 1) throw ConfigError("crew_size must be >= 1");
  const auto budget = expected_fraud_count();
  if (n_rings * ring_size > budget)
    throw ConfigError("n_rings * ring_size (" + std::to_string(n_rings * ring_size) +
                      ") exceeds the expected fraud count (" + std::to_string(budget) + ")");
  const auto good = n_transactions - budget;
  if (hub_entity_count * hub_max_size > good)
    throw ConfigError("hub_entity_count * hub_max_size exceeds the number of good transactions");
}

std::size_t Dataset::index_of(TxnId id) const {
  // Transactions are generated with txn_id == position; fall back to search otherwise.
  if (id >= 0 && static_cast<std::size_t>(id) < transactions.size() &&
      transactions[static_cast<std::size_t>(id)].txn_id == id)
    return static_cast<std::size_t>(id);
  for (std::size_t i = 0; i < transactions.size(); ++i)
    if (transactions[i].txn_id == id) return i;
  throw ConsistencyError("transaction " + std::to_string(id) + " not in dataset");
}

bool Dataset::contains(TxnId id) const {
  try {
    (void)index_of(id);
    return true;
  } catch (const ConsistencyError&) {
    return false;
  }
}

namespace {

constexpr double kDwellSigma = 0.6;
constexpr double kWindowDays = 120.0;
constexpr std::size_t kRingLoopPages = 6;
constexpr double kGuestSharedIp = 0.25;
constexpr double kGuestSharedDevice = 0.15;
constexpr double kGuestSharedAddr = 0.1;
constexpr double kGuestSharedCard = 0.05;

struct Archetype {
  std::vector<std::vector<double>> successor_cdf;  // [page] -> CDF over pages 1..V-1
  std::vector<double> start_cdf;
  std::vector<double> log_median_dwell;  // [page]
  std::vector<double> category_cdf;      // over categories 1..C-1
  std::size_t len_lo = 0, len_hi = 0;    // session length range; 0 uses the config range
  double category_stick = 0.85;          // chance an event stays in the session category
  double dwell_sigma = kDwellSigma;
};

std::vector<double> to_cdf(std::vector<double> w) {
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  double acc = 0.0;
  for (auto& x : w) {
    acc += x / total;
    x = acc;
  }
  w.back() = 1.0;
  return w;
}

std::size_t sample_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform();
  return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

bool dwell_sensitive(int page) {
  return std::find(kDwellSensitivePages.begin(), kDwellSensitivePages.end(), page) != kDwellSensitivePages.end();
}

Archetype make_good_archetype(const GeneratorConfig& cfg, Rng& rng) {
  const std::size_t pages = cfg.page_vocab_size - 1;
  Archetype a;
  a.successor_cdf.resize(cfg.page_vocab_size);
  for (std::size_t p = 1; p < cfg.page_vocab_size; ++p) {
    std::vector<double> w(pages, 0.05 / static_cast<double>(pages));
    const std::size_t fan = std::min<std::size_t>(4, pages);
    for (std::size_t k = 0; k < fan; ++k) w[rng.below(pages)] += std::exp(rng.normal()) / static_cast<double>(fan);
    a.successor_cdf[p] = to_cdf(std::move(w));
  }
  std::vector<double> start(pages);
  for (auto& x : start) x = std::exp(rng.normal());
  a.start_cdf = to_cdf(std::move(start));
  a.log_median_dwell.assign(cfg.page_vocab_size, 0.0);
  for (std::size_t p = 1; p < cfg.page_vocab_size; ++p) {
    const bool sensitive = dwell_sensitive(static_cast<int>(p));
    a.log_median_dwell[p] = std::log(sensitive ? rng.uniform(20000.0, 60000.0) : rng.uniform(2000.0, 20000.0));
  }
  std::vector<double> cats(cfg.n_categories - 1);
  for (auto& x : cats) x = std::exp(1.5 * rng.normal());
  a.category_cdf = to_cdf(std::move(cats));
  return a;
}

Archetype make_ring_archetype(const GeneratorConfig& cfg, const std::vector<std::size_t>& risky_categories,
                              Rng& rng) {
  const std::size_t pages = cfg.page_vocab_size - 1;
  Archetype a;
  a.successor_cdf.resize(cfg.page_vocab_size);
  // Rings replay a script: a short cycle of pages entered at its first page.
  std::vector<std::size_t> perm(pages);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm.begin(), perm.end());
  const std::size_t loop = std::min(kRingLoopPages, pages);
  std::vector<std::size_t> next(pages, perm[0]);
  for (std::size_t k = 0; k < loop; ++k) next[perm[k]] = perm[(k + 1) % loop];
  for (std::size_t p = 1; p < cfg.page_vocab_size; ++p) {
    std::vector<double> w(pages, 0.03 / static_cast<double>(pages));
    w[next[p - 1]] += 0.97;
    a.successor_cdf[p] = to_cdf(std::move(w));
  }
  std::vector<double> start(pages, 0.01 / static_cast<double>(pages));
  start[perm[0]] += 0.99;
  a.category_stick = 0.97;
  a.dwell_sigma = 0.3;
  a.start_cdf = to_cdf(std::move(start));
  const std::size_t span = cfg.max_events - cfg.min_events;
  a.len_lo = cfg.min_events + rng.below(span > 3 ? span - 2 : 1);
  a.len_hi = std::min(cfg.max_events, a.len_lo + 1);
  a.log_median_dwell.assign(cfg.page_vocab_size, 0.0);
  for (std::size_t p = 1; p < cfg.page_vocab_size; ++p) {
    const bool sensitive = dwell_sensitive(static_cast<int>(p));
    a.log_median_dwell[p] = std::log(sensitive ? rng.uniform(1500.0, 5000.0) : rng.uniform(1000.0, 10000.0));
  }
  std::vector<double> cats(cfg.n_categories - 1, 0.05 / static_cast<double>(cfg.n_categories - 1));
  cats[risky_categories[rng.below(risky_categories.size())] - 1] += 0.95;
  a.category_cdf = to_cdf(std::move(cats));
  return a;
}

/// A lone fraudster imitates a good archetype's navigation but rushes item pages.
Archetype make_lone_archetype(const Archetype& mimic, Rng& rng) {
  Archetype a = mimic;
  for (int p : kDwellSensitivePages)
    if (static_cast<std::size_t>(p) < a.log_median_dwell.size()) a.log_median_dwell[p] = std::log(rng.uniform(2000.0, 6000.0));
  return a;
}

BehaviorSequence sample_sequence(const GeneratorConfig& cfg, const Archetype& a, Rng& rng) {
  const std::size_t lo = a.len_lo ? a.len_lo : cfg.min_events, hi = a.len_hi ? a.len_hi : cfg.max_events;
  const std::size_t len = lo + rng.below(hi - lo + 1);
  const int session_category = static_cast<int>(sample_cdf(a.category_cdf, rng)) + 1;
  BehaviorSequence seq;
  seq.reserve(len);
  int page = static_cast<int>(sample_cdf(a.start_cdf, rng)) + 1;
  for (std::size_t i = 0; i < len; ++i) {
    if (i > 0) page = static_cast<int>(sample_cdf(a.successor_cdf[static_cast<std::size_t>(page)], rng)) + 1;
    EventRecord e;
    e.page_id = page;
    e.category = rng.bernoulli(a.category_stick) ? session_category
                                     : static_cast<int>(1 + rng.below(cfg.n_categories - 1));
    e.dwell_ms = std::round(rng.lognormal(a.log_median_dwell[static_cast<std::size_t>(page)], a.dwell_sigma));
    seq.push_back(e);
  }
  return seq;
}

double round6(double x) { return std::round(x * 1e6) / 1e6; }

enum class Kind { good, ring, lone };

struct Plan {
  Kind kind = Kind::good;
  std::int64_t ring = -1;  // ring index or crew index
  std::int64_t user = -1;  // pool user, or -1 for a new/guest buyer
  bool new_buyer = false;
};

struct PoolUser {
  std::size_t archetype = 0;
  std::int64_t device = 0, card = 0, addr = 0, ip = 0;
  double account_age = 0.0, email_extra = 0.0, typical_amount = 0.0;
  int pre_history = 0, pre_chargebacks = 0;
  // running state
  double last_time = -1.0;
  int dataset_count = 0;
  std::vector<double> times;
  std::vector<std::int64_t> seen_devices, seen_addrs, seen_cards;
};

struct Group {
  std::vector<std::int64_t> devices, cards, addrs, ips;
};

bool contains(const std::vector<std::int64_t>& v, std::int64_t x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

Dataset generate(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t n = cfg.n_transactions;
  const std::size_t n_fraud = cfg.expected_fraud_count();
  const std::size_t n_ring_txn = cfg.n_rings * cfg.ring_size;

  std::int64_t next_entity[4] = {1, 1, 1, 1};
  auto fresh = [&](EntityType t) { return next_entity[static_cast<int>(t)]++; };

  // Category risk priors; rings favor the riskiest third.
  std::vector<double> category_risk(cfg.n_categories, 0.0);
  for (std::size_t c = 1; c < cfg.n_categories; ++c) category_risk[c] = rng.uniform();
  std::vector<std::size_t> by_risk(cfg.n_categories - 1);
  std::iota(by_risk.begin(), by_risk.end(), 1);
  std::sort(by_risk.begin(), by_risk.end(), [&](auto a, auto b) { return category_risk[a] > category_risk[b]; });
  by_risk.resize(std::max<std::size_t>(1, by_risk.size() / 3));

  std::vector<Archetype> good;
  for (std::size_t i = 0; i < cfg.n_archetypes_good; ++i) good.push_back(make_good_archetype(cfg, rng));
  std::vector<Archetype> rings;
  for (std::size_t i = 0; i < cfg.n_rings; ++i) rings.push_back(make_ring_archetype(cfg, by_risk, rng));
  // Zipf-like archetype popularity among good users.
  std::vector<double> popularity(cfg.n_archetypes_good);
  for (std::size_t i = 0; i < popularity.size(); ++i) popularity[i] = 1.0 / std::sqrt(static_cast<double>(i + 1));
  const auto popularity_cdf = to_cdf(popularity);

  auto share = [&](EntityType t) {
    auto it = cfg.entity_share_probs.find(t);
    return it == cfg.entity_share_probs.end() ? 0.0 : it->second;
  };

  std::vector<Group> ring_groups(cfg.n_rings);
  std::vector<double> ring_amount(cfg.n_rings);
  for (std::size_t r = 0; r < cfg.n_rings; ++r) {
    auto& g = ring_groups[r];
    for (int k = 0; k < 2; ++k) g.devices.push_back(fresh(EntityType::device));
    for (int k = 0; k < 3; ++k) g.cards.push_back(fresh(EntityType::card_token));
    for (int k = 0; k < 2; ++k) g.addrs.push_back(fresh(EntityType::ship_addr));
    for (int k = 0; k < 2; ++k) g.ips.push_back(fresh(EntityType::ip));
    ring_amount[r] = rng.lognormal(std::log(80.0), 0.6);
  }
  const std::size_t n_lone = n_fraud - n_ring_txn;
  const std::size_t n_crews = (n_lone + cfg.crew_size - 1) / cfg.crew_size;
  std::vector<Group> crews(n_crews);
  for (auto& g : crews) {
    g.devices.push_back(fresh(EntityType::device));
    g.cards.push_back(fresh(EntityType::card_token));
  }

  std::vector<std::int64_t> shared_ips(std::max<std::size_t>(1, n / 500)),
      shared_devices(std::max<std::size_t>(1, n / 1000)), shared_addrs(std::max<std::size_t>(1, n / 1000)),
      shared_cards(std::max<std::size_t>(1, n / 1000));
  for (auto& v : shared_ips) v = fresh(EntityType::ip);
  for (auto& v : shared_devices) v = fresh(EntityType::device);
  for (auto& v : shared_addrs) v = fresh(EntityType::ship_addr);
  for (auto& v : shared_cards) v = fresh(EntityType::card_token);
  for (auto& v : shared_addrs) v = fresh(EntityType::ship_addr);

  std::vector<PoolUser> users(cfg.n_users);
  for (auto& u : users) {
    u.archetype = sample_cdf(popularity_cdf, rng);
    u.device = fresh(EntityType::device);
    u.card = fresh(EntityType::card_token);
    u.addr = fresh(EntityType::ship_addr);
    u.ip = fresh(EntityType::ip);
    u.account_age = rng.uniform(30.0, 3000.0);
    u.email_extra = rng.uniform(0.0, 1000.0);
    u.typical_amount = rng.lognormal(std::log(60.0), 0.7);
    u.pre_history = 1 + static_cast<int>(rng.below(50));
    u.pre_chargebacks = rng.bernoulli(0.02) ? 1 : 0;
  }

  // Plans: ring members, then lone fraud in crews, then good traffic.
  std::vector<Plan> plans(n);
  for (std::size_t i = 0; i < n; ++i) {
    Plan& p = plans[i];
    if (i < n_ring_txn) {
      p.kind = Kind::ring;
      p.ring = static_cast<std::int64_t>(i / cfg.ring_size);
    } else if (i < n_fraud) {
      p.kind = Kind::lone;
      p.ring = static_cast<std::int64_t>((i - n_ring_txn) / cfg.crew_size);
    }
    const double new_rate = p.kind == Kind::good ? cfg.new_buyer_rate : cfg.fraud_new_buyer_rate;
    p.new_buyer = rng.bernoulli(new_rate);
    if (!p.new_buyer) p.user = static_cast<std::int64_t>(rng.below(cfg.n_users));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());  // order[pos] = plan index

  Dataset ds;
  ds.transactions.resize(n);
  ds.sequences.resize(n);
  const std::size_t n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(n)));
  std::int64_t next_guest = static_cast<std::int64_t>(cfg.n_users);
  std::int64_t next_archetype = static_cast<std::int64_t>(cfg.n_archetypes_good + cfg.n_rings);

  // Pass 1: identity, entities, behavior, amount.
  std::vector<double> hours(n), email_age(n), distance(n), quantity(n), category_score(n);
  std::vector<int> device_seen(n), addr_seen(n), card_seen(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const Plan& plan = plans[order[pos]];
    Transaction& t = ds.transactions[pos];
    t.txn_id = static_cast<TxnId>(pos);
    t.split = pos < n_train ? Split::train : Split::test;
    t.is_fraud = plan.kind != Kind::good;
    t.is_new_buyer = plan.new_buyer;
    t.user_id = plan.new_buyer ? next_guest++ : plan.user;
    PoolUser* user = plan.new_buyer ? nullptr : &users[static_cast<std::size_t>(plan.user)];

    const Archetype* arch = nullptr;
    Archetype lone;
    if (plan.kind == Kind::ring) {
      arch = &rings[static_cast<std::size_t>(plan.ring)];
      t.archetype = static_cast<std::int64_t>(cfg.n_archetypes_good) + plan.ring;
      t.ring_id = plan.ring;
    } else if (plan.kind == Kind::lone) {
      lone = make_lone_archetype(good[rng.below(good.size())], rng);
      arch = &lone;
      t.archetype = next_archetype++;
    } else {
      const std::size_t a = user ? user->archetype : sample_cdf(popularity_cdf, rng);
      arch = &good[a];
      t.archetype = static_cast<std::int64_t>(a);
    }
    ds.sequences[pos] = sample_sequence(cfg, *arch, rng);

    auto& ent = t.entities;
    auto set = [&](EntityType type, std::int64_t v) { ent[static_cast<int>(type)] = v; };
    if (plan.kind == Kind::good) {
      if (user) {
        set(EntityType::device, rng.bernoulli(0.9) ? user->device : fresh(EntityType::device));
        set(EntityType::card_token, rng.bernoulli(0.9) ? user->card : fresh(EntityType::card_token));
        set(EntityType::ship_addr, rng.bernoulli(0.95) ? user->addr : fresh(EntityType::ship_addr));
        set(EntityType::ip, rng.bernoulli(0.75) ? user->ip : fresh(EntityType::ip));
      } else {
        for (auto type : kEntityTypes) set(type, fresh(type));
        // Guests behind shared public ips and family devices.
        if (rng.bernoulli(kGuestSharedIp)) set(EntityType::ip, shared_ips[rng.below(shared_ips.size())]);
        if (rng.bernoulli(kGuestSharedDevice)) set(EntityType::device, shared_devices[rng.below(shared_devices.size())]);
        if (rng.bernoulli(kGuestSharedAddr)) set(EntityType::ship_addr, shared_addrs[rng.below(shared_addrs.size())]);
        if (rng.bernoulli(kGuestSharedCard)) set(EntityType::card_token, shared_cards[rng.below(shared_cards.size())]);
      }
    } else if (plan.kind == Kind::ring) {
      const Group& g = ring_groups[static_cast<std::size_t>(plan.ring)];
      auto pick = [&](EntityType type, const std::vector<std::int64_t>& pool) {
        set(type, rng.bernoulli(share(type)) ? pool[rng.below(pool.size())] : fresh(type));
      };
      pick(EntityType::device, g.devices);
      pick(EntityType::card_token, g.cards);
      pick(EntityType::ship_addr, g.addrs);
      pick(EntityType::ip, g.ips);
    } else {
      const Group& g = crews[static_cast<std::size_t>(plan.ring)];
      set(EntityType::device, rng.bernoulli(cfg.crew_share_prob) ? g.devices[0] : fresh(EntityType::device));
      set(EntityType::card_token, rng.bernoulli(cfg.crew_share_prob) ? g.cards[0] : fresh(EntityType::card_token));
      set(EntityType::ship_addr, fresh(EntityType::ship_addr));
      set(EntityType::ip, fresh(EntityType::ip));
    }
    // Account takeover keeps the victim's card some of the time.
    if (plan.kind != Kind::good && user && rng.bernoulli(0.3)) set(EntityType::card_token, user->card);

    if (plan.kind == Kind::ring)
      t.amount = std::max(1.0, std::round(ring_amount[static_cast<std::size_t>(plan.ring)] *
                                          rng.lognormal(0.0, 0.3) * 100.0) / 100.0);
    else if (plan.kind == Kind::lone)
      t.amount = std::max(1.0, std::round(rng.lognormal(std::log(75.0), 0.9) * 100.0) / 100.0);
    else
      t.amount = std::max(1.0, std::round((user ? user->typical_amount * rng.lognormal(0.0, 0.5)
                                                : rng.lognormal(std::log(60.0), 0.9)) * 100.0) / 100.0);

    const double ratepay = t.is_fraud ? std::min(1.0, 1.3 * cfg.ratepay_rate) : cfg.ratepay_rate;
    if (rng.bernoulli(ratepay)) {
      t.payment_kind = PaymentKind::ratepay;
    } else {
      const double u = rng.uniform();
      t.payment_kind = u < 0.6 ? PaymentKind::card : (u < 0.9 ? PaymentKind::wallet : PaymentKind::bank_transfer);
    }

    const bool fraud = t.is_fraud;
    hours[pos] = fraud && rng.bernoulli(0.12) ? rng.normal(3.0, 2.5) : rng.normal(14.0, 4.0);
    hours[pos] = std::fmod(std::fmod(hours[pos], 24.0) + 24.0, 24.0);
    if (user) {
      email_age[pos] = user->account_age + user->email_extra;
    } else {
      const double fresh_email = fraud ? 0.6 : 0.5;
      email_age[pos] = rng.bernoulli(fresh_email) ? rng.uniform(0.0, 30.0) : rng.uniform(100.0, 4000.0);
    }
    distance[pos] = fraud ? rng.lognormal(std::log(15.0), 1.5)
                          : (user ? rng.lognormal(std::log(5.0), 1.2) : rng.lognormal(std::log(15.0), 1.5));
    quantity[pos] = static_cast<double>(1 + rng.below(3) + (rng.bernoulli(fraud ? 0.25 : 0.08) ? 1 : 0));
    const int cat = ds.sequences[pos].back().category;
    category_score[pos] = category_risk[static_cast<std::size_t>(cat)] + rng.normal(0.0, 0.3);
    if (user) {
      device_seen[pos] = t.entity(EntityType::device) == user->device ? 1 : 0;
      addr_seen[pos] = t.entity(EntityType::ship_addr) == user->addr ? 1 : 0;
      card_seen[pos] = t.entity(EntityType::card_token) == user->card ? 1 : 0;
    }
  }

  // Hub entities: over-shared public ips and forwarder addresses on unrelated good traffic.
  {
    std::vector<std::size_t> good_pos;
    for (std::size_t pos = 0; pos < n; ++pos)
      if (!ds.transactions[pos].is_fraud) good_pos.push_back(pos);
    rng.shuffle(good_pos.begin(), good_pos.end());
    std::size_t cursor = 0;
    for (std::size_t h = 0; h < cfg.hub_entity_count; ++h) {
      const EntityType type = h % 2 == 0 ? EntityType::ip : EntityType::ship_addr;
      const std::int64_t value = fresh(type);
      const std::size_t size = cfg.hub_min_size + rng.below(cfg.hub_max_size - cfg.hub_min_size + 1);
      for (std::size_t k = 0; k < size; ++k)
        ds.transactions[good_pos[cursor++]].entities[static_cast<int>(type)] = value;
    }
  }

  // Pass 2: chronological history features.
  std::array<std::unordered_map<std::int64_t, int>, 4> entity_counts;
  for (std::size_t pos = 0; pos < n; ++pos) {
    Transaction& t = ds.transactions[pos];
    const Plan& plan = plans[order[pos]];
    PoolUser* user = plan.new_buyer ? nullptr : &users[static_cast<std::size_t>(plan.user)];
    const double now = kWindowDays * static_cast<double>(pos) / static_cast<double>(std::max<std::size_t>(1, n));
    auto& f = t.raw_features;
    f[0] = std::log1p(t.amount);
    f[1] = user ? t.amount / user->typical_amount : 1.0;
    if (user) {
      f[2] = std::log1p(user->account_age + now);
      f[3] = std::log1p(static_cast<double>(user->pre_history + user->dataset_count));
      f[4] = static_cast<double>(user->pre_chargebacks);
      const double gap = user->last_time < 0.0 ? rng.uniform(1.0, 90.0) : now - user->last_time;
      f[5] = std::log1p(gap);
      f[6] = device_seen[pos] || contains(user->seen_devices, t.entity(EntityType::device));
      f[7] = addr_seen[pos] || contains(user->seen_addrs, t.entity(EntityType::ship_addr));
      f[8] = card_seen[pos] || contains(user->seen_cards, t.entity(EntityType::card_token));
      int recent = 0;
      for (double tm : user->times)
        if (now - tm <= 1.0) ++recent;
      f[18] = recent;
    } else {
      f[2] = std::log1p(rng.uniform(0.0, 3.0));
      f[3] = 0.0;
      f[4] = 0.0;
      f[5] = -1.0;
      f[6] = f[7] = f[8] = 0.0;
      f[18] = 0.0;
    }
    // f009..f012: device, ip, shipping address, card token.
    constexpr std::array<EntityType, 4> kCountOrder = {EntityType::device, EntityType::ip, EntityType::ship_addr,
                                                       EntityType::card_token};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto type = static_cast<std::size_t>(kCountOrder[k]);
      auto& c = entity_counts[type][t.entities[type]];
      f[9 + k] = std::log1p(static_cast<double>(c));
      ++c;
    }
    f[13] = std::log1p(email_age[pos]);
    f[14] = hours[pos];
    f[15] = static_cast<double>(static_cast<int>(t.payment_kind));
    f[16] = category_score[pos];
    f[17] = std::log1p(distance[pos]);
    f[19] = quantity[pos];
    for (std::size_t k = kInformativeFeatures; k < kRawFeatureDim; ++k) f[k] = rng.normal();
    for (auto& x : f) x = round6(x);

    if (user) {
      user->last_time = now;
      ++user->dataset_count;
      user->times.push_back(now);
      if (user->times.size() > 8) user->times.erase(user->times.begin());
      user->seen_devices.push_back(t.entity(EntityType::device));
      user->seen_addrs.push_back(t.entity(EntityType::ship_addr));
      user->seen_cards.push_back(t.entity(EntityType::card_token));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Files

FileManifest write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory", dir.string());
  FileManifest manifest;

  {
    csv::Writer w(dir / kEventsFile, {"txn_id", "seq_idx", "page_id", "category", "dwell_ms"});
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& seq = ds.sequences[i];
      for (std::size_t k = 0; k < seq.size(); ++k) {
        w.field(ds.transactions[i].txn_id).field(k).field(seq[k].page_id).field(seq[k].category).field(seq[k].dwell_ms);
        w.end_row();
      }
    }
    manifest.push_back({kEventsFile, w.rows()});
    w.close();
  }
  {
    auto header = csv::numbered_columns("f", kRawFeatureDim);
    header.insert(header.begin(), "txn_id");
    csv::Writer w(dir / kFeaturesFile, header);
    for (const auto& t : ds.transactions) {
      w.field(t.txn_id);
      for (double x : t.raw_features) w.field(x);
      w.end_row();
    }
    manifest.push_back({kFeaturesFile, w.rows()});
    w.close();
  }
  {
    csv::Writer w(dir / kLabelsFile, {"txn_id", "user_id", "amount", "is_fraud", "is_new_buyer", "payment_kind", "split"});
    for (const auto& t : ds.transactions) {
      w.field(t.txn_id).field(t.user_id).field(t.amount).field(t.is_fraud ? 1 : 0).field(t.is_new_buyer ? 1 : 0);
      w.field(to_string(t.payment_kind)).field(to_string(t.split));
      w.end_row();
    }
    manifest.push_back({kLabelsFile, w.rows()});
    w.close();
  }
  {
    csv::Writer w(dir / kEntitiesFile, {"txn_id", "entity_type", "entity_value"});
    for (const auto& t : ds.transactions)
      for (auto type : kEntityTypes) {
        w.field(t.txn_id).field(to_string(type)).field(t.entity(type));
        w.end_row();
      }
    manifest.push_back({kEntitiesFile, w.rows()});
    w.close();
  }
  {
    csv::Writer w(dir / kTruthFile, {"txn_id", "archetype", "ring_id"});
    for (const auto& t : ds.transactions) {
      w.field(t.txn_id).field(t.archetype).field(t.ring_id);
      w.end_row();
    }
    manifest.push_back({kTruthFile, w.rows()});
    w.close();
  }
  return manifest;
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  std::unordered_map<TxnId, std::size_t> index;
  std::vector<std::string_view> f;
  auto lookup = [&](TxnId id, const csv::Reader& r) {
    auto it = index.find(id);
    if (it == index.end())
      throw IoError("unknown txn_id " + std::to_string(id) + " on line " + std::to_string(r.line_number()),
                    r.path().string());
    return it->second;
  };
  {
    csv::Reader r(dir / kLabelsFile, {"txn_id", "user_id", "amount", "is_fraud", "is_new_buyer", "payment_kind", "split"});
    while (r.next(f)) {
      Transaction t;
      t.txn_id = csv::parse_int(f[0]);
      t.user_id = csv::parse_int(f[1]);
      t.amount = csv::parse_double(f[2]);
      t.is_fraud = csv::parse_int(f[3]) != 0;
      t.is_new_buyer = csv::parse_int(f[4]) != 0;
      t.payment_kind = parse_payment_kind(f[5]);
      t.split = parse_split(f[6]);
      if (!index.emplace(t.txn_id, ds.transactions.size()).second)
        throw IoError("duplicate txn_id " + std::to_string(t.txn_id), r.path().string());
      ds.transactions.push_back(t);
    }
  }
  ds.sequences.resize(ds.transactions.size());
  {
    auto header = csv::numbered_columns("f", kRawFeatureDim);
    header.insert(header.begin(), "txn_id");
    csv::Reader r(dir / kFeaturesFile, header);
    while (r.next(f)) {
      auto& t = ds.transactions[lookup(csv::parse_int(f[0]), r)];
      for (std::size_t k = 0; k < kRawFeatureDim; ++k) t.raw_features[k] = csv::parse_double(f[k + 1]);
    }
  }
  {
    csv::Reader r(dir / kEventsFile, {"txn_id", "seq_idx", "page_id", "category", "dwell_ms"});
    while (r.next(f)) {
      auto& seq = ds.sequences[lookup(csv::parse_int(f[0]), r)];
      const auto idx = static_cast<std::size_t>(csv::parse_int(f[1]));
      if (idx != seq.size()) throw IoError("events out of order on line " + std::to_string(r.line_number()), r.path().string());
      seq.push_back({static_cast<int>(csv::parse_int(f[2])), static_cast<int>(csv::parse_int(f[3])), csv::parse_double(f[4])});
    }
  }
  {
    csv::Reader r(dir / kEntitiesFile, {"txn_id", "entity_type", "entity_value"});
    while (r.next(f)) {
      auto& t = ds.transactions[lookup(csv::parse_int(f[0]), r)];
      t.entities[static_cast<int>(parse_entity_type(f[1]))] = csv::parse_int(f[2]);
    }
  }
  if (std::filesystem::exists(dir / kTruthFile)) {
    csv::Reader r(dir / kTruthFile, {"txn_id", "archetype", "ring_id"});
    while (r.next(f)) {
      auto& t = ds.transactions[lookup(csv::parse_int(f[0]), r)];
      t.archetype = csv::parse_int(f[1]);
      t.ring_id = csv::parse_int(f[2]);
    }
  }
  return ds;
}

}  // namespace slg::synth
