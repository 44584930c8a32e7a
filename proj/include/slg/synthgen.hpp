#pragma once

// Synthetic e-commerce transactions with clickstreams and planted fraud rings.
//
// Raw feature dictionary (f000..f099). The first 20 columns carry signal, the
// remaining 80 are independent standard normals.
//
//   f000  log1p(amount)
//   f001  amount relative to the user's typical amount (1 for new buyers)
//   f002  log1p(account age, days)
//   f003  log1p(prior transaction count)
//   f004  prior chargeback count
//   f005  log1p(days since the user's previous transaction), -1 without history
//   f006  device previously used by this user (0/1)
//   f007  shipping address previously used by this user (0/1)
//   f008  card token previously used by this user (0/1)
//   f009  log1p(earlier transactions on the same device)
//   f010  log1p(earlier transactions on the same ip)
//   f011  log1p(earlier transactions to the same shipping address)
//   f012  log1p(earlier transactions with the same card token)
//   f013  log1p(email age, days)
//   f014  hour of day
//   f015  payment kind code
//   f016  item-category risk prior
//   f017  log1p(billing to shipping distance, km)
//   f018  user transactions in the previous 24h
//   f019  item quantity
//   f020..f099  noise

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "slg/types.hpp"

namespace slg::synth {

inline constexpr std::size_t kRawFeatureDim = 100;
inline constexpr std::size_t kInformativeFeatures = 20;
inline constexpr int kPadToken = 0;
/// Designated "view item" page; fraud archetypes spend little time here.
inline constexpr int kViewItemPage = 1;
/// Pages whose dwell time separates fraud from good archetypes.
inline constexpr std::array<int, 3> kDwellSensitivePages = {1, 2, 3};

enum class EntityType : int { device = 0, card_token = 1, ship_addr = 2, ip = 3 };
inline constexpr std::array<EntityType, 4> kEntityTypes = {EntityType::device, EntityType::card_token,
                                                           EntityType::ship_addr, EntityType::ip};
std::string_view to_string(EntityType t);
EntityType parse_entity_type(std::string_view s);

enum class PaymentKind : int { card = 0, wallet = 1, ratepay = 2, bank_transfer = 3 };
/// `ratepay` is the ratepay-like kind used by segment Group4.
std::string_view to_string(PaymentKind p);
PaymentKind parse_payment_kind(std::string_view s);

enum class Split : int { train = 0, test = 1 };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct GeneratorConfig {
  std::size_t n_users = 20000;
  std::size_t n_transactions = 50000;
  double fraud_rate = 0.031;
  std::size_t n_rings = 50;
  std::size_t ring_size = 16;
  std::size_t page_vocab_size = 40;  // includes PAD
  std::size_t n_categories = 12;     // includes PAD
  std::size_t n_archetypes_good = 24;
  std::map<EntityType, double> entity_share_probs = {
      {EntityType::device, 0.4}, {EntityType::card_token, 0.25}, {EntityType::ship_addr, 0.35}, {EntityType::ip, 0.45}};
  double new_buyer_rate = 0.06;        // share of good transactions from new/guest buyers
  double fraud_new_buyer_rate = 0.35;  // share of fraud transactions from new/guest buyers
  double ratepay_rate = 0.012;
  std::size_t hub_entity_count = 10;
  std::size_t hub_min_size = 30;
  std::size_t hub_max_size = 120;
  std::size_t crew_size = 5;          // lone fraudsters sharing devices/cards without shared behavior
  double crew_share_prob = 0.5;
  std::size_t min_events = 6;
  std::size_t max_events = 36;
  double train_fraction = 0.76;
  std::uint64_t seed = 7;

  std::size_t expected_fraud_count() const;
  /// Throws ConfigError naming the violated invariant.
  void validate() const;
};

struct EventRecord {
  int page_id = 0;
  int category = 0;
  double dwell_ms = 0.0;
  bool operator==(const EventRecord&) const = default;
};
using BehaviorSequence = std::vector<EventRecord>;

struct Transaction {
  TxnId txn_id = 0;
  std::int64_t user_id = 0;
  double amount = 0.0;
  bool is_fraud = false;
  bool is_new_buyer = false;
  PaymentKind payment_kind = PaymentKind::card;
  std::array<std::int64_t, 4> entities{};  // indexed by EntityType
  std::array<double, kRawFeatureDim> raw_features{};
  Split split = Split::train;
  // Generator ground truth, persisted in truth.csv.
  std::int64_t archetype = 0;
  std::int64_t ring_id = -1;

  std::int64_t entity(EntityType t) const { return entities[static_cast<int>(t)]; }
  bool operator==(const Transaction&) const = default;
};

/// Transactions in chronological order; sequences[i] belongs to transactions[i].
struct Dataset {
  std::vector<Transaction> transactions;
  std::vector<BehaviorSequence> sequences;

  std::size_t size() const noexcept { return transactions.size(); }
  /// Position of a txn id; throws ConsistencyError when unknown.
  std::size_t index_of(TxnId id) const;
  bool contains(TxnId id) const;
  bool operator==(const Dataset&) const = default;
};

Dataset generate(const GeneratorConfig& config);

struct ManifestEntry {
  std::string file;
  std::size_t rows = 0;
};
using FileManifest = std::vector<ManifestEntry>;

/// Writes events.csv, features.csv, labels.csv, entities.csv and truth.csv.
FileManifest write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

inline constexpr const char* kEventsFile = "events.csv";
inline constexpr const char* kFeaturesFile = "features.csv";
inline constexpr const char* kLabelsFile = "labels.csv";
inline constexpr const char* kEntitiesFile = "entities.csv";
inline constexpr const char* kTruthFile = "truth.csv";

}  // namespace slg::synth
