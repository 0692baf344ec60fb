#pragma once

// `semtext` command line. Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "semtext/config.hpp"
#include "semtext/error.hpp"
#include "semtext/ingest.hpp"
#include "semtext/lexical.hpp"
#include "semtext/server.hpp"
#include "semtext/service.hpp"
#include "semtext/tsne.hpp"

namespace semtext {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

namespace detail {

inline AppConfig cli_config(const std::string& path) {
    if (path.empty()) return AppConfig{};
    return load_config(path);
}

inline std::filesystem::path from_cwd(const std::string& p) { return std::filesystem::absolute(p); }

inline std::string one_line(std::string s, std::size_t limit = 100) {
    for (char& c : s) {
        if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    }
    if (s.size() > limit) {
        std::size_t cut = limit;
        while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
        s = s.substr(0, cut) + "...";
    }
    return s;
}

inline std::vector<CorpusRecord> baseline_corpus(const AppConfig& cfg, const std::string& corpus) {
    std::filesystem::path path;
    if (!corpus.empty()) {
        path = from_cwd(corpus);
    } else if (cfg.corpus_path) {
        path = *cfg.corpus_path;
    } else {
        fail(ErrorCode::InvalidArgument, "baseline needs --corpus or [corpus] path in the config");
    }
    return read_corpus(path).records;
}

} // namespace detail

/// Runs one CLI invocation, writing to `out` and `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Semantic text analysis: embeddings, search, clustering, t-SNE maps and grounded Q&A", "semtext"};
    app.require_subcommand(0, 1);

    std::string config_path;
    bool json = false;
    const auto common = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "TOML configuration file")->check(CLI::ExistingFile);
        cmd->add_flag("--json", json, "Machine-readable output");
    };

    std::string corpus;
    auto* ingest_cmd = app.add_subcommand("ingest", "Chunk, embed and index a JSONL corpus");
    common(ingest_cmd);
    ingest_cmd->add_option("--corpus", corpus, "JSONL file (defaults to [corpus] path)");

    std::string query;
    std::size_t top = 10;
    bool use_rerank = false;
    auto* search_cmd = app.add_subcommand("search", "Semantic search over the index");
    common(search_cmd);
    search_cmd->add_option("-q,--query", query, "Query text")->required();
    search_cmd->add_option("-n,--top", top, "Number of results")->check(CLI::PositiveNumber);
    search_cmd->add_flag("--rerank", use_rerank, "Re-score a wider candidate pool");

    std::string text_arg;
    std::string categories;
    auto* classify_cmd = app.add_subcommand("classify", "Best-fit category for a text");
    common(classify_cmd);
    classify_cmd->add_option("-t,--text", text_arg, "Text to classify")->required();
    classify_cmd->add_option("--categories", categories, "Categories JSON file")->required()->check(CLI::ExistingFile);

    std::size_t k = 2;
    std::uint64_t seed = 0;
    auto* cluster_cmd = app.add_subcommand("cluster", "k-means over document vectors");
    common(cluster_cmd);
    cluster_cmd->add_option("-k,--k", k, "Number of clusters")->check(CLI::PositiveNumber);
    cluster_cmd->add_option("--seed", seed, "Random seed");

    double perplexity = 30.0;
    std::string out_path;
    auto* tsne_cmd = app.add_subcommand("tsne", "2-D t-SNE map of document vectors");
    common(tsne_cmd);
    tsne_cmd->add_option("--perplexity", perplexity, "Target perplexity");
    tsne_cmd->add_option("--seed", seed, "Random seed");
    tsne_cmd->add_option("-o,--out", out_path, "Output file, .csv or .json (stdout when omitted)");

    std::string question;
    std::optional<std::size_t> ask_top;
    auto* ask_cmd = app.add_subcommand("ask", "Answer a question from the indexed documents");
    common(ask_cmd);
    ask_cmd->add_option("-q,--question", question, "Question")->required();
    ask_cmd->add_option("-n,--top", ask_top, "Chunks of context")->check(CLI::PositiveNumber);

    std::string bind;
    int port = 0;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
    common(serve_cmd);
    serve_cmd->add_option("--bind", bind, "Bind address");
    serve_cmd->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));

    std::string mode;
    std::string terms;
    auto* baseline_cmd = app.add_subcommand("baseline", "Lexical baselines: dictionary flagging or TF-IDF search");
    common(baseline_cmd);
    baseline_cmd->add_option("mode", mode, "dictionary or tfidf")
        ->required()
        ->check(CLI::IsMember({"dictionary", "tfidf"}));
    baseline_cmd->add_option("--terms", terms, "Term list, one per line (dictionary)")->check(CLI::ExistingFile);
    baseline_cmd->add_option("-q,--query", query, "Query text (tfidf)");
    baseline_cmd->add_option("-t,--text", text_arg, "Single text to flag instead of the corpus (dictionary)");
    baseline_cmd->add_option("--corpus", corpus, "JSONL corpus (defaults to [corpus] path)");
    baseline_cmd->add_option("-n,--top", top, "Number of results (tfidf)")->check(CLI::PositiveNumber);

    if (argc <= 1) {
        err << app.help();
        return kExitUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }
    if (app.get_subcommands().empty()) {
        err << app.help();
        return kExitUsage;
    }

    try {
        const AppConfig cfg = detail::cli_config(config_path);

        if (ingest_cmd->parsed()) {
            Service svc(cfg);
            const auto report = corpus.empty() ? svc.ingest() : svc.ingest(detail::from_cwd(corpus));
            if (json) {
                out << to_json(report).dump(2) << "\n";
            } else {
                out << "ingested " << report.docs << " documents, " << report.chunks << " chunks into "
                    << cfg.index_path.string() << "\n";
                for (const auto& s : report.skipped) out << "skipped line " << s.line << ": " << s.reason << "\n";
            }
            return kExitOk;
        }

        if (search_cmd->parsed()) {
            Service svc(cfg);
            const auto results = svc.search(query, top, use_rerank);
            if (json) {
                out << results.dump(2) << "\n";
                return kExitOk;
            }
            for (const auto& r : results) {
                const auto& meta = r["metadata"];
                out << r["rank"].get<std::size_t>() << ". " << r["display"].get<std::string>() << "  "
                    << r["doc_id"].get<std::string>();
                if (meta.contains("name")) out << "  " << meta["name"].get<std::string>();
                out << "\n   " << detail::one_line(r["excerpt"].get<std::string>()) << "\n";
            }
            return kExitOk;
        }

        if (classify_cmd->parsed()) {
            Service svc(cfg);
            const auto result = svc.classify(text_arg, detail::from_cwd(categories));
            if (json) {
                out << result.dump(2) << "\n";
                return kExitOk;
            }
            out << "best fit: " << result["category_id"].get<std::string>() << " ("
                << result["display"].get<std::string>() << ")";
            if (result["tie"].get<bool>()) out << " [tie with " << result["runner_up"].get<std::string>() << "]";
            out << "\n";
            for (const auto& r : result["ranking"]) {
                out << "  " << r["category_id"].get<std::string>() << "  " << r["display"].get<std::string>()
                    << "  cohen=" << r["cohen"].get<std::string>() << " practice=" << r["practice"].get<std::string>()
                    << "\n";
            }
            return kExitOk;
        }

        if (cluster_cmd->parsed()) {
            Service svc(cfg);
            const auto result = svc.cluster(k, seed);
            if (json) {
                out << result.dump(2) << "\n";
                return kExitOk;
            }
            out << "k=" << k << " inertia=" << result["inertia"].get<double>() << "\n";
            for (const auto& c : result["clusters"]) {
                out << "cluster " << c["cluster"].get<std::size_t>() << " (" << c["size"].get<std::size_t>()
                    << " docs):";
                for (const auto& e : c["exemplars"]) out << " " << e["doc_id"].get<std::string>();
                out << "\n";
            }
            return kExitOk;
        }

        if (tsne_cmd->parsed()) {
            Service svc(cfg);
            const TsneLayout layout = svc.tsne_layout(perplexity, seed);
            if (!out_path.empty()) {
                const std::filesystem::path p = detail::from_cwd(out_path);
                export_layout(layout, p, layout_format_for(p));
                if (!json) out << "wrote " << layout.size() << " points to " << out_path << "\n";
                else out << nlohmann::json{{"points", layout.size()}, {"path", out_path}}.dump() << "\n";
            } else {
                out << (json ? layout_to_json(layout) + "\n" : layout_to_csv(layout));
            }
            return kExitOk;
        }

        if (ask_cmd->parsed()) {
            Service svc(cfg);
            const auto result = svc.ask_json(question, ask_top);
            if (json) {
                out << result.dump(2) << "\n";
                return kExitOk;
            }
            out << result["answer"].get<std::string>() << "\n";
            for (const auto& s : result["sources"]) {
                out << "  [" << s["chunk_id"].get<std::string>() << "] " << s["display"].get<std::string>() << "\n";
            }
            return kExitOk;
        }

        if (serve_cmd->parsed()) {
            AppConfig scfg = cfg;
            if (!bind.empty()) scfg.server.bind = bind;
            if (port != 0) scfg.server.port = port;
            Service svc(scfg);
            ApiServer server(svc);
            const int bound = server.bind(scfg.server.bind, scfg.server.port);
            err << "listening on http://" << scfg.server.bind << ":" << bound << "\n";
            server.listen();
            return kExitOk;
        }

        if (baseline_cmd->parsed()) {
            if (mode == "dictionary") {
                if (terms.empty()) fail(ErrorCode::InvalidArgument, "dictionary mode needs --terms");
                const TermDictionary dict = load_dictionary(detail::from_cwd(terms));
                std::vector<CorpusRecord> docs;
                if (!text_arg.empty()) {
                    docs.push_back({"text", text_arg, {}});
                } else {
                    docs = detail::baseline_corpus(cfg, corpus);
                }
                nlohmann::json rows = nlohmann::json::array();
                for (const auto& d : docs) {
                    const FlagResult r = dictionary_flag(dict, d.text);
                    nlohmann::json hits = nlohmann::json::array();
                    for (const auto& h : r.hits) hits.push_back({{"term", h.term}, {"offset", h.offset}});
                    rows.push_back({{"doc_id", d.doc_id}, {"flagged", r.flagged}, {"hits", hits}});
                }
                if (json) {
                    out << rows.dump(2) << "\n";
                    return kExitOk;
                }
                for (const auto& row : rows) {
                    out << row["doc_id"].get<std::string>() << ": "
                        << (row["flagged"].get<bool>() ? "flagged" : "clean");
                    for (const auto& h : row["hits"]) out << " " << h["term"].get<std::string>();
                    out << "\n";
                }
                return kExitOk;
            }
            if (text::is_blank(query)) fail(ErrorCode::EmptyInput, "tfidf mode needs --query");
            std::vector<std::pair<std::string, std::string>> docs;
            for (const auto& d : detail::baseline_corpus(cfg, corpus)) {
                docs.emplace_back(d.doc_id, strip_noise(d.text, cfg.noise_rules()));
            }
            const TfidfIndex index = build_tfidf(docs);
            const auto results = tfidf_search(index, query, top);
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& r : results) {
                rows.push_back({{"rank", r.rank}, {"doc_id", r.item_id}, {"score", r.score},
                                {"display", format_percentage(r.score)}});
            }
            if (json) {
                out << rows.dump(2) << "\n";
                return kExitOk;
            }
            for (const auto& r : rows) {
                out << r["rank"].get<std::size_t>() << ". " << r["display"].get<std::string>() << "  "
                    << r["doc_id"].get<std::string>() << "\n";
            }
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace semtext
