#include "daskt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "daskt/affect_features.hpp"
#include "daskt/ingest.hpp"
#include "daskt/train.hpp"

namespace daskt {

namespace fs = std::filesystem;

namespace {

struct FactorRow {
  int student = 0, part = 0, role = 0, segment = -1;
  VecX v;
};

void save_factors(const fs::path& path, const std::vector<FactorRow>& rows,
                  const FactorLayout& layout, const std::string& config_hash) {
  std::ostringstream out;
  out << "# daskt-factors v1\n# config_hash=" << config_hash << "\n# dims:";
  for (int i = 0; i < layout.dim(); ++i) out << " " << layout.dim_name(i);
  out << "\nstudent\tpart\trole\tsegment\tvalues...\n";
  for (const auto& r : rows) {
    out << r.student << "\t" << r.part << "\t" << r.role << "\t" << r.segment;
    for (int i = 0; i < r.v.size(); ++i) out << "\t" << fmt_full(r.v[i]);
    out << "\n";
  }
  write_text_file(path.string(), out.str());
}

std::vector<FactorRow> load_factors(const fs::path& path) {
  std::vector<FactorRow> rows;
  std::istringstream in(read_text_file(path.string()));
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    auto f = split(line, '\t');
    if (f.size() < 5) fail(ErrorClass::config, "bad factors line in " + path.string());
    FactorRow r;
    r.student = std::stoi(f[0]);
    r.part = std::stoi(f[1]);
    r.role = std::stoi(f[2]);
    r.segment = std::stoi(f[3]);
    r.v = VecX::Zero(static_cast<int>(f.size()) - 4);
    for (std::size_t i = 4; i < f.size(); ++i) r.v[static_cast<int>(i) - 4] = std::stod(f[i]);
    rows.push_back(std::move(r));
  }
  return rows;
}

struct FoldRoles {
  std::set<std::string> train, val, test;
};

FoldRoles fold_roles(const std::vector<DatasetSplit>& folds, int fold) {
  if (fold < 0 || fold >= static_cast<int>(folds.size()))
    fail(ErrorClass::config, "fold index out of range: " + std::to_string(fold));
  FoldRoles r;
  const auto& f = folds[static_cast<std::size_t>(fold)];
  r.train.insert(f.train_students.begin(), f.train_students.end());
  r.val.insert(f.val_students.begin(), f.val_students.end());
  r.test.insert(f.test_students.begin(), f.test_students.end());
  return r;
}

std::string metric_cell(const std::optional<double>& v) {
  return v ? fmt_fixed(*v) : std::string("NA");
}

struct Agg {
  std::vector<double> rmse, acc, auc, r2;
  void add(const Metrics& m) {
    rmse.push_back(m.rmse);
    acc.push_back(m.acc);
    if (m.auc) auc.push_back(*m.auc);
    if (m.r2) r2.push_back(*m.r2);
  }
  static double mean(const std::vector<double>& v) {
    if (v.empty()) return std::nan("");
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }
  static double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v), s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  }
};

}  // namespace

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), workdir_(cfg_.str("workdir")) {}

std::vector<int> Pipeline::folds_to_run() const {
  const std::string rf = cfg_.str("run_folds");
  std::vector<int> out;
  if (rf == "all") {
    for (int f = 0; f < cfg_.integer("folds"); ++f) out.push_back(f);
  } else {
    for (const auto& part : split(rf, ',')) out.push_back(std::stoi(trim(part)));
  }
  return out;
}

bool Pipeline::fresh(const fs::path& p, const std::string& hash) const {
  return fs::exists(p) && artifact_config_hash(p.string()) == hash;
}

// ---- hashes ----

std::string Pipeline::ingest_hash() const {
  std::vector<std::string> keys = {
      "dataset", "response_cap_ms", "folds", "seed",
      "col.student", "col.problem", "col.kc", "col.correct", "col.start",
      "col.end", "col.response", "col.attempts", "col.time_unit",
      "col.response_unit", "col.delimiter", "col.conf_frustration",
      "col.conf_concentration", "col.conf_boredom", "col.conf_confusion"};
  std::string input = cfg_.str("input");
  std::vector<std::string> extra;
  if (!input.empty() && fs::exists(input)) extra.push_back(to_hex(hash_file(input)));
  return cfg_.subset_hash("ingest", keys, extra);
}

std::string Pipeline::stats_hash(int fold) const {
  std::vector<std::string> extra{to_hex(hash_file(records_path().string())),
                                 to_hex(hash_file(folds_path().string())),
                                 "fold=" + std::to_string(fold)};
  return cfg_.subset_hash("mine-affect", {"target_len", "zscore"}, extra);
}

std::string Pipeline::segment_factors_hash(int fold) const {
  return cfg_.subset_hash("segment-factors", {"seg_len"}, {stats_hash(fold)});
}

std::string Pipeline::cluster_hash(int fold) const {
  return cfg_.subset_hash("cluster",
                          {"cluster_k", "cluster_max_iter", "cluster_tol", "seed", "seg_len"},
                          {stats_hash(fold), segment_factors_hash(fold)});
}

std::string Pipeline::train_hash(int fold, Ablation ab) const {
  std::vector<std::string> keys = {"dims",    "heads",     "concat_heads", "leaky_slope",
                                   "affect_source", "affect_lag", "lr",    "lambda",
                                   "batch",   "max_epochs", "patience",    "clip_norm",
                                   "precision", "seed",     "target_len",  "seg_len"};
  std::vector<std::string> extra{to_hex(hash_file(records_path().string())),
                                 to_hex(hash_file(folds_path().string())),
                                 "fold=" + std::to_string(fold),
                                 std::string("ablation=") + ablation_name(ab)};
  ModelConfig probe;
  probe.ablation = ab;
  if (probe.uses_affect()) extra.push_back(cluster_hash(fold));
  return cfg_.subset_hash("train", keys, extra);
}

// ---- stages ----

bool Pipeline::ingest(bool force) {
  fs::create_directories(workdir_);
  const std::string h = ingest_hash();
  bool have_conf = false;
  {
    ColumnMap m = cfg_.column_map();
    have_conf = !m.conf_frustration.empty();
  }
  bool all_fresh = fresh(records_path(), h) && fresh(folds_path(), h) &&
                   fresh(workdir_ / "vocab_students.tsv", h) &&
                   fresh(workdir_ / "vocab_problems.tsv", h) &&
                   fresh(workdir_ / "vocab_kcs.tsv", h);
  if (all_fresh && !force) return false;

  const std::string input = cfg_.str("input");
  if (input.empty()) fail(ErrorClass::ingest, "ingest: no input file configured");
  ParsedLog parsed = parse_log(input, cfg_.column_map(), cfg_.integer("response_cap_ms"));
  if (parsed.records.empty()) fail(ErrorClass::ingest, "ingest: no usable records in " + input);
  EncodedLog enc = encode_ids(parsed);
  enc.records.config_hash = h;
  save_records(records_path().string(), enc.records);
  enc.students.save((workdir_ / "vocab_students.tsv").string(), h);
  enc.problems.save((workdir_ / "vocab_problems.tsv").string(), h);
  enc.kcs.save((workdir_ / "vocab_kcs.tsv").string(), h);

  std::vector<std::string> student_ids;
  for (int i = 1; i <= enc.students.size(); ++i) student_ids.push_back(enc.students.decode(i));
  auto folds = make_folds(student_ids, static_cast<int>(cfg_.integer("folds")),
                          derive_seed(cfg_.seed("seed"), "folds"));
  save_folds(folds_path().string(), folds, h);

  if (enc.has_external_affect) {
    std::ostringstream out;
    out << "# daskt-external-affect v1\n# config_hash=" << h << "\n";
    out << "conf_frustration\tconf_concentration\tconf_boredom\tconf_confusion\n";
    for (const auto& c : enc.external_affect)
      out << fmt_full(c[0]) << "\t" << fmt_full(c[1]) << "\t" << fmt_full(c[2]) << "\t"
          << fmt_full(c[3]) << "\n";
    write_text_file(external_affect_path().string(), out.str());
  } else if (have_conf) {
    fail(ErrorClass::ingest, "ingest: affect confidence columns mapped but missing in rows");
  }

  // drop-count report
  std::ostringstream rep;
  rep << "# daskt-ingest-report v1\n# config_hash=" << h << "\n";
  rep << "total_rows\t" << parsed.stats.total_rows << "\n";
  rep << "kept\t" << parsed.stats.kept << "\n";
  rep << "dropped_empty_key\t" << parsed.stats.dropped_empty_key << "\n";
  rep << "dropped_bad_time\t" << parsed.stats.dropped_bad_time << "\n";
  rep << "dropped_bad_field\t" << parsed.stats.dropped_bad_field << "\n";
  rep << "clamped_response\t" << parsed.stats.clamped_response << "\n";
  write_text_file((workdir_ / "ingest_report.tsv").string(), rep.str());
  return true;
}

std::vector<StudentSequence> Pipeline::load_sequences() const {
  RecordFile rf = load_records(records_path().string());
  return build_sequences(rf.records, static_cast<int>(cfg_.integer("target_len")));
}

bool Pipeline::mine_affect(int fold, bool force) {
  fs::create_directories(fold_dir(fold));
  const std::string h_stats = stats_hash(fold);
  const std::string h_seg = segment_factors_hash(fold);
  bool stats_fresh = fresh(stats_path(fold), h_stats) &&
                     fresh(factors_whole_path(fold), h_stats);
  bool seg_fresh = fresh(factors_segments_path(fold), h_seg);
  if (stats_fresh && seg_fresh && !force) return false;

  auto sequences = load_sequences();
  auto folds = load_folds(folds_path().string());
  auto roles = fold_roles(folds, fold);
  Vocab students = Vocab::load((workdir_ / "vocab_students.tsv").string());
  Vocab kcs = Vocab::load((workdir_ / "vocab_kcs.tsv").string());

  auto role_of = [&](const StudentSequence& s) {
    const std::string& orig = students.decode(s.student_id);
    if (roles.train.count(orig)) return 0;
    if (roles.val.count(orig)) return 1;
    if (roles.test.count(orig)) return 2;
    fail(ErrorClass::affect, "student missing from fold manifest: " + orig);
  };

  std::vector<StudentSequence> train_seqs;
  for (const auto& s : sequences)
    if (role_of(s) == 0) train_seqs.push_back(s);
  if (train_seqs.empty()) fail(ErrorClass::affect, "mine-affect: empty training fold");

  PopulationStats stats;
  if (stats_fresh && !force) {
    stats = PopulationStats::load(stats_path(fold).string());
  } else {
    stats = population_stats(train_seqs, kcs.size(), cfg_.boolean("zscore"));
    stats.save(stats_path(fold).string(), h_stats);
    std::vector<FactorRow> whole;
    for (const auto& s : sequences) {
      FactorRow r;
      r.student = s.student_id;
      r.part = s.virtual_index;
      r.role = role_of(s);
      r.segment = -1;
      r.v = cluster_vector(RecordSpan(s.records), stats);
      whole.push_back(std::move(r));
    }
    save_factors(factors_whole_path(fold), whole, stats.layout, h_stats);
  }

  // per-segment factor vectors (the only seg_len-dependent artifact here)
  const int seg_len = static_cast<int>(cfg_.integer("seg_len"));
  std::vector<FactorRow> segs;
  for (const auto& s : sequences) {
    int n = s.effective_len();
    if (n == 0) continue;
    int role = role_of(s);
    RecordSpan all(s.records);
    int nseg = (n + seg_len - 1) / seg_len;
    for (int g = 0; g < nseg; ++g) {
      int lo = g * seg_len, hi = std::min(n, lo + seg_len);
      FactorRow r;
      r.student = s.student_id;
      r.part = s.virtual_index;
      r.role = role;
      r.segment = g;
      r.v = cluster_vector(
          all.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)), stats);
      segs.push_back(std::move(r));
    }
  }
  save_factors(factors_segments_path(fold), segs, stats.layout, h_seg);
  return true;
}

bool Pipeline::cluster_stage(int fold, bool force) {
  const std::string h = cluster_hash(fold);
  if (fresh(affect_model_path(fold), h) && fresh(assignments_path(fold), h) && !force)
    return false;

  auto whole = load_factors(factors_whole_path(fold));
  auto segs = load_factors(factors_segments_path(fold));
  PopulationStats stats = PopulationStats::load(stats_path(fold).string());

  std::vector<VecX> train_vectors;
  for (const auto& r : whole)
    if (r.role == 0) train_vectors.push_back(r.v);

  AffectModel model;
  model.k = static_cast<int>(cfg_.integer("cluster_k"));
  model.seg_len = static_cast<int>(cfg_.integer("seg_len"));
  model.seed = derive_seed(cfg_.seed("seed"), "cluster:" + std::to_string(fold));
  auto km = kmeans_fit(train_vectors, model.k, model.seed,
                       static_cast<int>(cfg_.integer("cluster_max_iter")),
                       cfg_.real("cluster_tol"));
  model.centers = km.centers;
  if (model.k == 4) model.name_map = name_clusters(model.centers, stats.layout);
  model.save(affect_model_path(fold).string(), h);

  std::vector<SegmentAffect> rows;
  for (const auto& r : whole)
    rows.push_back({r.student, r.part, -1, model.nearest(r.v)});
  for (const auto& r : segs)
    rows.push_back({r.student, r.part, r.segment, model.nearest(r.v)});
  std::sort(rows.begin(), rows.end(), [](const SegmentAffect& a, const SegmentAffect& b) {
    return std::tie(a.student_id, a.virtual_index, a.segment_index) <
           std::tie(b.student_id, b.virtual_index, b.segment_index);
  });
  save_assignments(assignments_path(fold).string(), rows, h);
  return true;
}

std::map<std::pair<int, int>, Pipeline::SeqAffect> Pipeline::load_assignment_index(
    int fold) const {
  std::map<std::pair<int, int>, SeqAffect> idx;
  for (const auto& a : load_assignments(assignments_path(fold).string())) {
    auto& sa = idx[{a.student_id, a.virtual_index}];
    if (a.segment_index < 0) {
      sa.whole = a.affect_index;
    } else {
      if (static_cast<int>(sa.segments.size()) <= a.segment_index)
        sa.segments.resize(static_cast<std::size_t>(a.segment_index) + 1, -1);
      sa.segments[static_cast<std::size_t>(a.segment_index)] = a.affect_index;
    }
  }
  return idx;
}

Pipeline::Prepared Pipeline::prepare(int fold, Ablation ab) const {
  Prepared out;
  out.sequences = load_sequences();
  auto folds = load_folds(folds_path().string());
  auto roles = fold_roles(folds, fold);
  Vocab students = Vocab::load((workdir_ / "vocab_students.tsv").string());
  Vocab problems = Vocab::load((workdir_ / "vocab_problems.tsv").string());
  Vocab kcs = Vocab::load((workdir_ / "vocab_kcs.tsv").string());
  out.num_problems = problems.size();
  out.num_kcs = kcs.size();

  ModelConfig probe;
  probe.ablation = ab;
  std::map<std::pair<int, int>, SeqAffect> affect_idx;
  if (probe.uses_affect()) affect_idx = load_assignment_index(fold);

  const int seg_len = static_cast<int>(cfg_.integer("seg_len"));
  const int lag = static_cast<int>(cfg_.integer("affect_lag"));

  for (const auto& s : out.sequences) {
    const std::string& orig = students.decode(s.student_id);
    int role = roles.train.count(orig) ? 0
               : roles.val.count(orig) ? 1
               : roles.test.count(orig)
                   ? 2
                   : (fail(ErrorClass::train, "student missing from fold manifest: " + orig), 2);
    out.roles.push_back(role);
    SeqInput in;
    for (const auto& r : s.records) {
      in.problems.push_back(r.problem_id);
      in.kcs.push_back(r.kc_id);
      in.responses.push_back(r.correct);
    }
    if (probe.uses_affect()) {
      auto it = affect_idx.find({s.student_id, s.virtual_index});
      if (it == affect_idx.end())
        fail(ErrorClass::train, "missing affect assignments for sequence " + s.key());
      in.affect = per_step_affect(s.effective_len(), seg_len, lag, ab, it->second.segments,
                                  it->second.whole);
    } else {
      in.affect.assign(static_cast<std::size_t>(s.effective_len()), -1);
    }
    out.inputs.push_back(std::move(in));
  }
  return out;
}

ModelConfig Pipeline::model_config(int fold, Ablation ab, int num_problems, int num_kcs,
                                   int factor_dim) const {
  ModelConfig mc;
  mc.d_p = mc.d_k = mc.d_r = mc.d_aff = mc.d = static_cast<int>(cfg_.integer("dims"));
  mc.heads = static_cast<int>(cfg_.integer("heads"));
  mc.concat_heads = cfg_.boolean("concat_heads");
  mc.leaky_slope = cfg_.real("leaky_slope");
  mc.ablation = ab;
  mc.affect_source = cfg_.str("affect_source") == "center" ? AffectSource::center
                                                           : AffectSource::embedding;
  mc.num_problems = num_problems;
  mc.num_kcs = num_kcs;
  mc.factor_dim = factor_dim;
  mc.init_seed = derive_seed(cfg_.seed("seed"),
                             "init:" + std::to_string(fold) + ":" + ablation_name(ab));
  return mc;
}

template <typename S>
Metrics Pipeline::train_and_eval(int fold, Ablation ab, bool do_train, bool force) {
  const std::string h_train = train_hash(fold, ab);
  const std::string h_eval =
      cfg_.subset_hash("evaluate", {}, {h_train, "fold=" + std::to_string(fold)});

  bool ckpt_fresh = fresh(checkpoint_path(fold, ab), h_train) &&
                    fresh(trainlog_path(fold, ab), h_train);
  bool eval_fresh = fresh(eval_path(fold, ab), h_eval);
  if (ckpt_fresh && eval_fresh && !force) {
    // parse the cached metrics row
    std::istringstream in(read_text_file(eval_path(fold, ab).string()));
    std::string line;
    Metrics m;
    bool header = false;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (!header) {
        header = true;
        continue;
      }
      auto f = split(line, '\t');
      m.rmse = std::stod(f[2]);
      m.acc = std::stod(f[3]);
      if (f[4] != "NA") m.auc = std::stod(f[4]);
      if (f[5] != "NA") m.r2 = std::stod(f[5]);
      m.n_predictions = std::stol(f[6]);
    }
    return m;
  }

  Prepared data = prepare(fold, ab);
  int factor_dim = 3 * data.num_kcs + 2;
  ModelConfig mc = model_config(fold, ab, data.num_problems, data.num_kcs, factor_dim);

  Mat<S> centers;
  const Mat<S>* centers_ptr = nullptr;
  if (mc.uses_affect() && mc.affect_source == AffectSource::center) {
    AffectModel am = AffectModel::load(affect_model_path(fold).string());
    centers = am.centers.cast<S>();
    centers_ptr = &centers;
  }
  DasktModelT<S> model(mc, centers_ptr);

  std::vector<SeqInput> train_in, val_in, test_in;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    if (data.roles[i] == 0)
      train_in.push_back(data.inputs[i]);
    else if (data.roles[i] == 1)
      val_in.push_back(data.inputs[i]);
    else
      test_in.push_back(data.inputs[i]);
  }

  if (!(ckpt_fresh && !force) && do_train) {
    TrainConfig tc;
    tc.lr = cfg_.real("lr");
    tc.lambda = cfg_.real("lambda");
    tc.clip_norm = cfg_.real("clip_norm");
    tc.batch = static_cast<int>(cfg_.integer("batch"));
    tc.max_epochs = static_cast<int>(cfg_.integer("max_epochs"));
    tc.patience = static_cast<int>(cfg_.integer("patience"));
    tc.shuffle_seed = derive_seed(cfg_.seed("seed"),
                                  "shuffle:" + std::to_string(fold) + ":" + ablation_name(ab));
    std::ostringstream log;
    log << "# daskt-trainlog v1\n# config_hash=" << h_train << "\n";
    auto res = train_model<S>(model, train_in, val_in, tc, &log);
    log << "best_epoch=" << res.best_epoch << " best_val_auc=" << fmt_fixed(res.best_val_auc)
        << "\n";
    model.params().save(checkpoint_path(fold, ab).string(), h_train);
    write_text_file(trainlog_path(fold, ab).string(), log.str());
  } else {
    model.params().load(checkpoint_path(fold, ab).string());
  }

  if (!(ckpt_fresh && !force) || !eval_fresh || force) {
    Metrics m = evaluate_model<S>(model, test_in);
    std::ostringstream out;
    out << "# daskt-eval v1\n# config_hash=" << h_eval << "\n";
    out << "fold\tvariant\trmse\tacc\tauc\tr2\tn\n";
    out << fold << "\t" << ablation_name(ab) << "\t" << fmt_fixed(m.rmse) << "\t"
        << fmt_fixed(m.acc) << "\t" << metric_cell(m.auc) << "\t" << metric_cell(m.r2)
        << "\t" << m.n_predictions << "\n";
    write_text_file(eval_path(fold, ab).string(), out.str());
    return m;
  }
  return evaluate_model<S>(model, test_in);
}

bool Pipeline::train_stage(int fold, Ablation ab, bool force) {
  const std::string h = train_hash(fold, ab);
  if (fresh(checkpoint_path(fold, ab), h) && fresh(trainlog_path(fold, ab), h) && !force)
    return false;
  if (cfg_.str("precision") == "float")
    train_and_eval<float>(fold, ab, true, force);
  else
    train_and_eval<double>(fold, ab, true, force);
  return true;
}

Metrics Pipeline::evaluate_stage(int fold, Ablation ab, bool force) {
  if (cfg_.str("precision") == "float") return train_and_eval<float>(fold, ab, true, force);
  return train_and_eval<double>(fold, ab, true, force);
}

void Pipeline::run() {
  ingest();
  Ablation ab = parse_ablation(cfg_.str("ablation"));
  ModelConfig probe;
  probe.ablation = ab;
  auto folds = folds_to_run();
  int jobs = std::max(1, static_cast<int>(cfg_.integer("jobs")));

  std::vector<Metrics> results(folds.size());
  std::vector<std::exception_ptr> errors(folds.size());
  auto work = [&](std::size_t i) {
    try {
      int fold = folds[i];
      if (probe.uses_affect()) {
        mine_affect(fold);
        cluster_stage(fold);
      }
      train_stage(fold, ab);
      results[i] = evaluate_stage(fold, ab);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  for (std::size_t lo = 0; lo < folds.size(); lo += static_cast<std::size_t>(jobs)) {
    std::vector<std::thread> pool;
    std::size_t hi = std::min(folds.size(), lo + static_cast<std::size_t>(jobs));
    for (std::size_t i = lo; i < hi; ++i) pool.emplace_back(work, i);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);

  // final report
  std::vector<std::string> hashes;
  for (int f : folds) hashes.push_back(train_hash(f, ab));
  std::string h = cfg_.subset_hash("report", {}, hashes);
  std::ostringstream out;
  out << "# daskt-report v1\n# config_hash=" << h << "\n";
  out << "fold\tvariant\trmse\tacc\tauc\tr2\tn\n";
  Agg agg;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    const Metrics& m = results[i];
    agg.add(m);
    out << folds[i] << "\t" << ablation_name(ab) << "\t" << fmt_fixed(m.rmse) << "\t"
        << fmt_fixed(m.acc) << "\t" << metric_cell(m.auc) << "\t" << metric_cell(m.r2)
        << "\t" << m.n_predictions << "\n";
  }
  out << "mean\t" << ablation_name(ab) << "\t" << fmt_fixed(Agg::mean(agg.rmse)) << "\t"
      << fmt_fixed(Agg::mean(agg.acc)) << "\t" << fmt_fixed(Agg::mean(agg.auc)) << "\t"
      << fmt_fixed(Agg::mean(agg.r2)) << "\t-\n";
  out << "std\t" << ablation_name(ab) << "\t" << fmt_fixed(Agg::stddev(agg.rmse)) << "\t"
      << fmt_fixed(Agg::stddev(agg.acc)) << "\t" << fmt_fixed(Agg::stddev(agg.auc)) << "\t"
      << fmt_fixed(Agg::stddev(agg.r2)) << "\t-\n";
  write_text_file((workdir_ / "report.tsv").string(), out.str());
  write_manifest();
}

void Pipeline::ablation_grid(const std::vector<Ablation>& variants, std::ostream& warnings) {
  ingest();
  auto folds = folds_to_run();
  bool needs_affect = false;
  for (auto v : variants) {
    ModelConfig probe;
    probe.ablation = v;
    needs_affect |= probe.uses_affect();
  }
  int jobs = std::max(1, static_cast<int>(cfg_.integer("jobs")));

  std::vector<std::vector<Metrics>> results(variants.size(),
                                            std::vector<Metrics>(folds.size()));
  std::vector<std::exception_ptr> errors(folds.size());
  auto work = [&](std::size_t i) {
    try {
      int fold = folds[i];
      if (needs_affect) {
        mine_affect(fold);
        cluster_stage(fold);
      }
      for (std::size_t v = 0; v < variants.size(); ++v) {
        train_stage(fold, variants[v]);
        results[v][i] = evaluate_stage(fold, variants[v]);
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  for (std::size_t lo = 0; lo < folds.size(); lo += static_cast<std::size_t>(jobs)) {
    std::vector<std::thread> pool;
    std::size_t hi = std::min(folds.size(), lo + static_cast<std::size_t>(jobs));
    for (std::size_t i = lo; i < hi; ++i) pool.emplace_back(work, i);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);

  std::vector<std::string> hashes;
  for (std::size_t v = 0; v < variants.size(); ++v)
    for (int f : folds) hashes.push_back(train_hash(f, variants[v]));
  std::string h = cfg_.subset_hash("ablation-report", {}, hashes);

  std::ostringstream out;
  out << "# daskt-ablation-report v1\n# config_hash=" << h << "\n";
  out << "variant\tfold\trmse\tacc\tauc\tr2\trmse_std\tacc_std\tauc_std\tr2_std\n";
  std::vector<double> mean_auc(variants.size(), std::nan(""));
  for (std::size_t v = 0; v < variants.size(); ++v) {
    Agg agg;
    for (std::size_t i = 0; i < folds.size(); ++i) {
      const Metrics& m = results[v][i];
      agg.add(m);
      out << ablation_name(variants[v]) << "\t" << folds[i] << "\t" << fmt_fixed(m.rmse)
          << "\t" << fmt_fixed(m.acc) << "\t" << metric_cell(m.auc) << "\t"
          << metric_cell(m.r2) << "\t\t\t\t\n";
    }
    mean_auc[v] = Agg::mean(agg.auc);
    out << ablation_name(variants[v]) << "\tmean\t" << fmt_fixed(Agg::mean(agg.rmse)) << "\t"
        << fmt_fixed(Agg::mean(agg.acc)) << "\t" << fmt_fixed(Agg::mean(agg.auc)) << "\t"
        << fmt_fixed(Agg::mean(agg.r2)) << "\t" << fmt_fixed(Agg::stddev(agg.rmse)) << "\t"
        << fmt_fixed(Agg::stddev(agg.acc)) << "\t" << fmt_fixed(Agg::stddev(agg.auc)) << "\t"
        << fmt_fixed(Agg::stddev(agg.r2)) << "\n";
  }
  // soft ordering check over the canonical variant order
  const Ablation expect_order[] = {Ablation::full, Ablation::no_a_gat, Ablation::no_at_gat,
                                   Ablation::no_ica, Ablation::no_maf};
  double prev = std::numeric_limits<double>::infinity();
  for (Ablation e : expect_order) {
    for (std::size_t v = 0; v < variants.size(); ++v) {
      if (variants[v] != e || std::isnan(mean_auc[v])) continue;
      if (mean_auc[v] > prev + 1e-12) {
        warnings << "WARNING: ablation ordering violated: " << ablation_name(e)
                 << " mean AUC " << fmt_fixed(mean_auc[v]) << " exceeds the previous variant ("
                 << fmt_fixed(prev) << ")\n";
        out << "# warning: ordering violated at " << ablation_name(e) << "\n";
      }
      prev = mean_auc[v];
    }
  }
  write_text_file((workdir_ / "ablation_report.tsv").string(), out.str());
  write_manifest();
}

ConsistencyTable Pipeline::consistency(const std::string& assignments_file,
                                       const std::string& external_file,
                                       const std::string& out_path) {
  if (!fs::exists(external_file))
    fail(ErrorClass::consistency, "consistency: missing external affect file " + external_file);
  if (!fs::exists(assignments_file))
    fail(ErrorClass::consistency, "consistency: missing assignments file " + assignments_file);

  // the affect model sits next to the assignments and carries the name map
  fs::path model_path = fs::path(assignments_file).parent_path() / "affect_model.tsv";
  if (!fs::exists(model_path))
    fail(ErrorClass::consistency,
         "consistency: affect_model.tsv not found beside assignments");
  AffectModel model = AffectModel::load(model_path.string());

  // index assignments
  std::map<std::pair<int, int>, SeqAffect> idx;
  for (const auto& a : load_assignments(assignments_file)) {
    auto& sa = idx[{a.student_id, a.virtual_index}];
    if (a.segment_index < 0) {
      sa.whole = a.affect_index;
    } else {
      if (static_cast<int>(sa.segments.size()) <= a.segment_index)
        sa.segments.resize(static_cast<std::size_t>(a.segment_index) + 1, -1);
      sa.segments[static_cast<std::size_t>(a.segment_index)] = a.affect_index;
    }
  }

  // per-record our affect, aligned with canonical record order
  RecordFile rf = load_records(records_path().string());
  const int target_len = static_cast<int>(cfg_.integer("target_len"));
  std::map<int, int> seen_count;
  std::vector<int> ours;
  ours.reserve(rf.records.size());
  for (const auto& r : rf.records) {
    int ordinal = seen_count[r.student_id]++;
    int part = ordinal / target_len;
    int pos = ordinal % target_len;
    int seg = pos / model.seg_len;
    auto it = idx.find({r.student_id, part});
    int affect = -1;
    if (it != idx.end() && seg < static_cast<int>(it->second.segments.size())) {
      int cluster = it->second.segments[static_cast<std::size_t>(seg)];
      if (cluster >= 0) affect = model.name_map[static_cast<std::size_t>(cluster)];
    }
    ours.push_back(affect);
  }

  // external confidences, row-aligned
  std::vector<std::array<double, 4>> external;
  {
    std::istringstream in(read_text_file(external_file));
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (!header) {
        header = true;
        continue;
      }
      auto f = split(line, '\t');
      if (f.size() != 4)
        fail(ErrorClass::consistency, "consistency: bad external affect row");
      external.push_back({std::stod(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3])});
    }
  }
  if (external.size() != ours.size())
    fail(ErrorClass::consistency, "consistency: external file not aligned with records");

  ConsistencyTable t = affect_consistency(ours, external);
  if (!out_path.empty()) {
    std::string h = cfg_.subset_hash(
        "consistency", {},
        {to_hex(hash_file(assignments_file)), to_hex(hash_file(external_file))});
    write_consistency_report(out_path, t, h);
  }
  return t;
}

void write_consistency_report(const std::string& path, const ConsistencyTable& t,
                              const std::string& config_hash) {
  std::ostringstream out;
  out << "# daskt-consistency v1\n# config_hash=" << config_hash << "\n";
  out << "affect\texternal_count\tagree_count\tconsistency_rate\n";
  for (const auto& row : t.per_affect)
    out << affect_name(row.affect) << "\t" << row.external_count << "\t" << row.agree_count
        << "\t" << fmt_fixed(row.rate(), 2) << "\n";
  out << "total\t" << t.total << "\t" << t.total_agree << "\t"
      << fmt_fixed(t.overall_rate(), 2) << "\n";
  write_text_file(path, out.str());
}

void Pipeline::export_states(const std::string& checkpoint_file, const std::string& student,
                             int every, const std::string& out_path) {
  if (every < 1) fail(ErrorClass::export_states, "export-states: every must be >= 1");
  int fold = static_cast<int>(cfg_.integer("fold"));
  Ablation ab = parse_ablation(cfg_.str("ablation"));
  const std::string h_train = train_hash(fold, ab);
  std::string embedded = artifact_config_hash(checkpoint_file);
  if (embedded != h_train)
    fail(ErrorClass::export_states,
         "export-states: checkpoint config hash " + embedded +
             " does not match the current config (" + h_train + "); refusing silent reuse");

  Vocab students = Vocab::load((workdir_ / "vocab_students.tsv").string());
  Vocab kcs = Vocab::load((workdir_ / "vocab_kcs.tsv").string());
  int sid = students.lookup(student);
  if (sid == 0) fail(ErrorClass::export_states, "export-states: unknown student " + student);

  Prepared data = prepare(fold, ab);
  ModelConfig mc = model_config(fold, ab, data.num_problems, data.num_kcs,
                                3 * data.num_kcs + 2);
  Mat<double> centers;
  const Mat<double>* centers_ptr = nullptr;
  if (mc.uses_affect() && mc.affect_source == AffectSource::center) {
    centers = AffectModel::load(affect_model_path(fold).string()).centers;
    centers_ptr = &centers;
  }
  DasktModelT<double> model(mc, centers_ptr);
  model.params().load(checkpoint_file);

  AffectModel am;
  bool have_names = mc.uses_affect();
  if (have_names) am = AffectModel::load(affect_model_path(fold).string());

  // every sequence of this student, in part order
  std::vector<std::size_t> mine;
  for (std::size_t i = 0; i < data.sequences.size(); ++i)
    if (data.sequences[i].student_id == sid) mine.push_back(i);
  if (mine.empty()) fail(ErrorClass::export_states, "export-states: student has no records");
  std::sort(mine.begin(), mine.end(), [&](std::size_t a, std::size_t b) {
    return data.sequences[a].virtual_index < data.sequences[b].virtual_index;
  });

  // track the KCs the student actually touched
  std::set<int> kc_set;
  for (auto i : mine)
    for (const auto& r : data.sequences[i].records) kc_set.insert(r.kc_id);
  std::vector<int> kc_list(kc_set.begin(), kc_set.end());

  std::ostringstream out;
  out << "# daskt-states v1\n# config_hash=" << h_train << "\n";
  out << "step\tproblem\tkc\tcorrect\taffect";
  for (int kc : kc_list) out << "\tks:" << kcs.decode(kc);
  out << "\n";
  int global_step = 0;
  ad::TapeT<double> tape;
  for (auto i : mine) {
    const auto& seq = data.sequences[i];
    const auto& in = data.inputs[i];
    tape.reset();
    auto fwd = model.forward(tape, in, /*want_hidden=*/true);
    for (int t = 0; t < seq.effective_len(); ++t) {
      ++global_step;
      bool last = (i == mine.back() && t == seq.effective_len() - 1);
      if (global_step % every != 0 && !last) continue;
      const auto& r = seq.records[static_cast<std::size_t>(t)];
      std::string aff = "none";
      if (have_names && in.affect[static_cast<std::size_t>(t)] >= 0)
        aff = affect_name(
            am.name_map[static_cast<std::size_t>(in.affect[static_cast<std::size_t>(t)])]);
      out << global_step << "\t" << r.problem_id << "\t" << kcs.decode(r.kc_id) << "\t"
          << r.correct << "\t" << aff;
      for (int kc : kc_list)
        out << "\t" << fmt_fixed(model.knowledge_state(fwd.hidden.col(t), kc), 4);
      out << "\n";
    }
  }
  write_text_file(out_path, out.str());
}

void Pipeline::write_manifest() {
  std::vector<std::pair<std::string, std::string>> rows;
  for (auto it = fs::recursive_directory_iterator(workdir_);
       it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    fs::path rel = fs::relative(it->path(), workdir_);
    if (rel.filename() == "manifest.tsv") continue;
    rows.emplace_back(rel.generic_string(), to_hex(hash_file(it->path().string())));
  }
  std::sort(rows.begin(), rows.end());
  std::ostringstream out;
  out << "# daskt-manifest v1\n";
  out << "path\tcontent_hash\tconfig_hash\n";
  for (const auto& [path, hash] : rows) {
    std::string embedded = artifact_config_hash((workdir_ / path).string());
    out << path << "\t" << hash << "\t" << (embedded.empty() ? "-" : embedded) << "\n";
  }
  write_text_file((workdir_ / "manifest.tsv").string(), out.str());
}

template Metrics Pipeline::train_and_eval<double>(int, Ablation, bool, bool);
template Metrics Pipeline::train_and_eval<float>(int, Ablation, bool, bool);

}  // namespace daskt
