//! Command-line interface: argument definitions and command execution.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use blockcampus_core::state::{BootstrapAccount, Service};
use blockcampus_core::tx::{cosign_registration, AdminCosig};
use blockcampus_core::{
    run_simulation, to_canonical, Address, Cid, ConsensusParams, ContentStore, Direction, EconParams, GenesisFile, Hash,
    KeyFile, Keypair, Node, PublicKey, Role, SignedTransaction, SimConfig, TxPayload, Validator, ValidatorSet,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::client::Client;
use crate::{plot, runtime};

#[derive(Debug, Parser)]
#[command(name = "blockcampus", version, about = "BlockCampus node, gateway and client")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a keypair file and print its address.
    Keygen {
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    #[command(subcommand)]
    Genesis(GenesisCmd),
    /// Approve a registration as an Admin or Owner; prints the cosignature JSON.
    Cosign {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        chain_id: String,
        /// Public key of the account being registered.
        #[arg(long)]
        pubkey: PublicKey,
        #[arg(long)]
        username: String,
        #[arg(long)]
        role: Role,
        #[arg(long, default_value = "")]
        staff_id: String,
    },
    #[command(subcommand)]
    Node(NodeCmd),
    /// Build, sign and submit a transaction.
    Tx(TxArgs),
    /// Read chain state from a node.
    Query(QueryArgs),
    #[command(subcommand)]
    Sim(SimCmd),
}

#[derive(Debug, Subcommand)]
pub enum GenesisCmd {
    /// Write a genesis file with default constants.
    Init {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "blockcampus")]
        chain_id: String,
        /// Validator key file or hex public key, in rotation order.
        #[arg(long = "validator", required = true)]
        validators: Vec<String>,
        /// Owner key file or hex public key.
        #[arg(long)]
        owner: String,
        /// Admin key file or hex public key.
        #[arg(long)]
        admin: String,
        /// Block 0 timestamp in seconds; defaults to now.
        #[arg(long)]
        genesis_time: Option<u64>,
        #[arg(long)]
        block_interval: Option<u64>,
        #[arg(long)]
        wait_step: Option<u64>,
        /// Initial service as `id:name:price`.
        #[arg(long = "service")]
        services: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum NodeCmd {
    /// Run a node with its HTTP gateway until interrupted.
    Run {
        #[arg(long)]
        genesis: PathBuf,
        /// Validator key; omit to run a full node that does not produce blocks.
        #[arg(long)]
        key: Option<PathBuf>,
        /// Peer base URLs, comma separated.
        #[arg(long, value_delimiter = ',')]
        peers: Vec<String>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// URL peers use to reach this node; defaults to http://<bind>.
        #[arg(long)]
        public_url: Option<String>,
        /// Directory for content blobs; kept in memory when omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TxArgs {
    /// Signing key file.
    #[arg(long, global = true)]
    pub key: Option<PathBuf>,
    #[arg(long, global = true, default_value = "http://127.0.0.1:8080")]
    pub node_url: String,
    /// Override the nonce instead of asking the node.
    #[arg(long, global = true)]
    pub nonce: Option<u64>,
    /// Block until the transaction is included.
    #[arg(long, global = true)]
    pub wait: bool,
    #[command(subcommand)]
    pub kind: TxKind,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Dir {
    Up,
    Down,
}

#[derive(Debug, Subcommand)]
pub enum TxKind {
    #[command(name = "register")]
    RegisterUser {
        #[arg(long)]
        username: String,
        #[arg(long)]
        role: Role,
        #[arg(long, default_value = "")]
        staff_id: String,
        /// File holding the output of `cosign`.
        #[arg(long)]
        cosig: PathBuf,
    },
    GrantRole {
        #[arg(long)]
        target: Address,
        #[arg(long)]
        role: Role,
    },
    RevokeRole {
        #[arg(long)]
        target: Address,
    },
    CreateCommunity {
        #[arg(long)]
        id: String,
        #[arg(long)]
        name: String,
    },
    #[command(name = "join")]
    JoinCommunity {
        #[arg(long)]
        id: String,
    },
    #[command(name = "ask")]
    PostQuestion {
        #[arg(long)]
        community: String,
        #[arg(long)]
        title: String,
        #[command(flatten)]
        body: BodyArgs,
    },
    #[command(name = "answer")]
    PostAnswer {
        #[arg(long)]
        question: Hash,
        #[command(flatten)]
        body: BodyArgs,
    },
    Vote {
        #[arg(long)]
        post: Hash,
        #[arg(long)]
        dir: Dir,
    },
    #[command(name = "rate")]
    StaffRate {
        #[arg(long)]
        post: Hash,
        #[arg(long)]
        stars: u8,
    },
    #[command(name = "award")]
    GiveAward {
        #[arg(long)]
        post: Hash,
    },
    #[command(name = "transfer")]
    TransferTofu {
        #[arg(long)]
        to: Address,
        #[arg(long)]
        amount: u64,
    },
    CreateService {
        #[arg(long)]
        id: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        price: u64,
    },
    #[command(name = "redeem")]
    RedeemService {
        #[arg(long)]
        service: String,
    },
    #[command(name = "flag")]
    FlagContent {
        #[arg(long)]
        post: Hash,
        #[arg(long)]
        reason: String,
    },
    #[command(name = "deactivate")]
    DeactivateAccount {
        #[arg(long)]
        target: Address,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct BodyArgs {
    /// Text to upload to the node's content store.
    #[arg(long)]
    body: Option<String>,
    /// Cid of content that is already stored.
    #[arg(long)]
    cid: Option<Cid>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long, global = true, default_value = "http://127.0.0.1:8080")]
    pub node_url: String,
    #[command(subcommand)]
    pub what: QueryCmd,
}

#[derive(Debug, Subcommand)]
pub enum QueryCmd {
    Account {
        /// Address to look up.
        address: Option<Address>,
        /// Look up the address of this key file instead.
        #[arg(long, conflicts_with = "address")]
        key: Option<PathBuf>,
    },
    Post {
        id: Hash,
    },
    Head,
}

#[derive(Debug, Subcommand)]
pub enum SimCmd {
    /// Run a deterministic multi-node simulation.
    Run {
        /// Scenario JSON; defaults apply to missing fields.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out_trace: Option<PathBuf>,
    },
    /// Plot head height per node over time from a trace.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// What a command reports, in both renderings.
pub struct Output {
    pub text: String,
    pub json: Value,
}

impl Output {
    fn new(text: impl Into<String>, json: Value) -> Self {
        Output { text: text.into(), json }
    }
}

pub fn run(cli: Cli) -> Result<Output> {
    match cli.command {
        Command::Keygen { out, force } => keygen(&out, force),
        Command::Genesis(GenesisCmd::Init {
            out,
            chain_id,
            validators,
            owner,
            admin,
            genesis_time,
            block_interval,
            wait_step,
            services,
        }) => {
            let validators = validators.iter().map(|v| load_pubkey(v).map(Validator::from_key)).collect::<Result<_>>()?;
            let boot = |pubkey: PublicKey, username: &str, role| BootstrapAccount {
                address: pubkey.address(),
                pubkey,
                username: username.into(),
                role,
            };
            let mut consensus = ConsensusParams::default();
            if let Some(b) = block_interval {
                consensus.block_interval = b;
            }
            if let Some(w) = wait_step {
                consensus.wait_step = w;
            }
            let mut g = GenesisFile {
                chain_id,
                genesis_time: genesis_time.unwrap_or_else(|| runtime::wall_clock_ms() / 1000),
                validators: ValidatorSet::new(validators)?,
                consensus,
                econ: EconParams::default(),
                bootstrap_accounts: vec![
                    boot(load_pubkey(&owner)?, "owner", Role::Owner),
                    boot(load_pubkey(&admin)?, "admin", Role::Admin),
                ],
                services: vec![],
            };
            g.services = services.iter().map(|s| parse_service(s)).collect::<Result<_>>()?;
            let block0 = g.block()?;
            fs::write(&out, g.to_json()?).with_context(|| format!("writing {}", out.display()))?;
            let text = format!("wrote {} (genesis {}, state root {})", out.display(), block0.hash(), block0.header.state_root);
            Ok(Output::new(text, json!({ "path": out, "genesis_hash": block0.hash(), "state_root": block0.header.state_root })))
        }
        Command::Cosign { key, chain_id, pubkey, username, role, staff_id } => {
            let admin = load_key(&key)?;
            let cosig = cosign_registration(&admin, &chain_id, &pubkey, &username, role, &staff_id);
            let value = serde_json::to_value(&cosig)?;
            Ok(Output::new(String::from_utf8(to_canonical(&cosig)?)?, value))
        }
        Command::Node(NodeCmd::Run { genesis, key, peers, bind, public_url, data_dir }) => {
            run_node(&genesis, key.as_deref(), peers, bind, public_url, data_dir)
        }
        Command::Tx(args) => submit(args),
        Command::Query(args) => query(args),
        Command::Sim(SimCmd::Run { scenario, out_trace }) => sim_run(scenario.as_deref(), out_trace.as_deref()),
        Command::Sim(SimCmd::Plot { trace, out }) => {
            let summary = plot::plot_trace(&fs::read(&trace)?, &out)?;
            let text = format!("wrote {} ({} nodes, {} head changes)", out.display(), summary.nodes, summary.points);
            Ok(Output::new(text, json!({ "path": out, "nodes": summary.nodes, "points": summary.points })))
        }
    }
}

fn keygen(out: &Path, force: bool) -> Result<Output> {
    if out.exists() && !force {
        bail!("{} already exists; pass --force to overwrite", out.display());
    }
    let kp = Keypair::generate(&mut rand::rngs::OsRng);
    fs::write(out, to_canonical(&KeyFile::from_keypair(&kp))?).with_context(|| format!("writing {}", out.display()))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(out, fs::Permissions::from_mode(0o600))?;
    }
    Ok(Output::new(kp.address().to_string(), json!({ "address": kp.address(), "pubkey": kp.public() })))
}

pub fn load_key(path: &Path) -> Result<Keypair> {
    let bytes = fs::read(path).with_context(|| format!("reading key file {}", path.display()))?;
    let file: KeyFile = serde_json::from_slice(&bytes).with_context(|| format!("malformed key file {}", path.display()))?;
    Ok(file.to_keypair()?)
}

/// Hex public key, or the public half of a key file.
fn load_pubkey(arg: &str) -> Result<PublicKey> {
    if let Ok(pk) = arg.parse::<PublicKey>() {
        return Ok(pk);
    }
    let bytes = fs::read(arg).with_context(|| format!("{arg:?} is neither a public key nor a readable key file"))?;
    let file: KeyFile = serde_json::from_slice(&bytes).with_context(|| format!("malformed key file {arg}"))?;
    Ok(file.pubkey_hex.parse()?)
}

fn parse_service(s: &str) -> Result<Service> {
    let mut parts = s.splitn(3, ':');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(id), Some(name), Some(price)) => {
            Ok(Service { id: id.into(), name: name.into(), price: price.parse().context("service price")? })
        }
        _ => bail!("service must be id:name:price, got {s:?}"),
    }
}

fn run_node(
    genesis: &Path,
    key: Option<&Path>,
    peers: Vec<String>,
    bind: SocketAddr,
    public_url: Option<String>,
    data_dir: Option<PathBuf>,
) -> Result<Output> {
    let genesis = GenesisFile::from_json(&fs::read(genesis).with_context(|| format!("reading {}", genesis.display()))?)?;
    let key = key.map(load_key).transpose()?;
    let content = match data_dir {
        Some(dir) => ContentStore::on_disk(dir.join("content"))?,
        None => ContentStore::in_memory(),
    };
    let node = Node::new(genesis, key, content)?;
    let role = if node.is_validator() { "validator" } else { "full node" };
    let public_url = public_url.unwrap_or_else(|| format!("http://{bind}"));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
        let (handle, _loop) = runtime::spawn(node, peers, public_url.clone());
        eprintln!("{role} listening on {public_url}");
        crate::api::serve(handle, listener).await?;
        Ok(Output::new("node stopped", json!({ "stopped": true })))
    })
}

fn payload(kind: TxKind, client: &Client) -> Result<TxPayload> {
    let upload = |body: BodyArgs| -> Result<Cid> {
        match (body.body, body.cid) {
            (_, Some(cid)) => Ok(cid),
            (Some(text), None) => client.put_content(text.into_bytes()),
            (None, None) => bail!("pass --body or --cid"),
        }
    };
    Ok(match kind {
        TxKind::RegisterUser { username, role, staff_id, cosig } => {
            let bytes = fs::read(&cosig).with_context(|| format!("reading {}", cosig.display()))?;
            let admin_cosig: AdminCosig = serde_json::from_slice(&bytes).context("malformed cosignature")?;
            TxPayload::RegisterUser { username, role, staff_id, admin_cosig }
        }
        TxKind::GrantRole { target, role } => TxPayload::GrantRole { target, role },
        TxKind::RevokeRole { target } => TxPayload::RevokeRole { target },
        TxKind::CreateCommunity { id, name } => TxPayload::CreateCommunity { id, name },
        TxKind::JoinCommunity { id } => TxPayload::JoinCommunity { id },
        TxKind::PostQuestion { community, title, body } => {
            TxPayload::PostQuestion { community, title, cid: upload(body)? }
        }
        TxKind::PostAnswer { question, body } => TxPayload::PostAnswer { question_id: question, cid: upload(body)? },
        TxKind::Vote { post, dir } => {
            let direction = match dir {
                Dir::Up => Direction::Up,
                Dir::Down => Direction::Down,
            };
            TxPayload::Vote { post_id: post, direction }
        }
        TxKind::StaffRate { post, stars } => TxPayload::StaffRate { post_id: post, stars },
        TxKind::GiveAward { post } => TxPayload::GiveAward { post_id: post },
        TxKind::TransferTofu { to, amount } => TxPayload::TransferTofu { to, amount },
        TxKind::CreateService { id, name, price } => TxPayload::CreateService { id, name, price },
        TxKind::RedeemService { service } => TxPayload::RedeemService { service_id: service },
        TxKind::FlagContent { post, reason } => TxPayload::FlagContent { post_id: post, reason },
        TxKind::DeactivateAccount { target } => TxPayload::DeactivateAccount { target },
    })
}

fn submit(args: TxArgs) -> Result<Output> {
    let Some(key_path) = args.key else { bail!("--key is required") };
    let key = load_key(&key_path)?;
    let client = Client::new(&args.node_url);
    let chain_id = client.params()?.chain_id;
    let payload = payload(args.kind, &client)?;
    let nonce = match args.nonce {
        Some(n) => n,
        None => client.next_nonce(&key.address())?,
    };
    let tx = SignedTransaction::new(&chain_id, nonce, payload, &key);
    let kind = tx.payload.kind();
    let tx_hash = client.submit(&tx)?;
    let mut included = None;
    if args.wait {
        client.wait_applied(&key.address(), nonce, Duration::from_secs(60))?;
        included = Some(client.params()?.head_height);
    }
    let text = match included {
        Some(h) => format!("{kind} {tx_hash} accepted, included by height {h}"),
        None => format!("{kind} {tx_hash} accepted"),
    };
    Ok(Output::new(text, json!({ "status": "accepted", "tx_hash": tx_hash, "kind": kind, "nonce": nonce })))
}

fn query(args: QueryArgs) -> Result<Output> {
    let client = Client::new(&args.node_url);
    match args.what {
        QueryCmd::Account { address, key } => {
            let address = match (address, key) {
                (Some(a), _) => a,
                (None, Some(k)) => load_key(&k)?.address(),
                (None, None) => bail!("pass an address or --key"),
            };
            let Some(a) = client.account(&address)? else { bail!("unknown account {address}") };
            let text = format!(
                "{} {} ({}) nonce {} bateekh {} tofu {}{}",
                a.address,
                a.username,
                a.role,
                a.nonce,
                a.bateekh,
                a.tofu,
                if a.active { "" } else { " [deactivated]" }
            );
            Ok(Output::new(text, serde_json::to_value(&a)?))
        }
        QueryCmd::Post { id } => {
            let p = client.post(&id)?;
            let text = format!(
                "{:?} {} by {} in {}: up {} down {} stars {:?} rank {} answers {}",
                p.post.post.kind,
                p.post.post.id,
                p.post.post.author,
                p.post.post.community,
                p.post.post.up,
                p.post.post.down,
                p.post.post.ratings.values().collect::<Vec<_>>(),
                p.post.rank_score,
                p.answers.len()
            );
            Ok(Output::new(text, serde_json::to_value(&p)?))
        }
        QueryCmd::Head => {
            let head = client.head()?;
            let text = format!(
                "height {} hash {} proposer {} txs {}",
                head["header"]["height"],
                head["hash"].as_str().unwrap_or("?"),
                head["header"]["proposer"].as_str().unwrap_or("?"),
                head["transactions"].as_array().map_or(0, Vec::len)
            );
            Ok(Output::new(text, head))
        }
    }
}

fn sim_run(scenario: Option<&Path>, out_trace: Option<&Path>) -> Result<Output> {
    let cfg: SimConfig = match scenario {
        Some(p) => serde_json::from_slice(&fs::read(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("malformed scenario {}", p.display()))?,
        None => SimConfig::default(),
    };
    let res = run_simulation(&cfg)?;
    if let Some(p) = out_trace {
        fs::write(p, res.trace_jsonl()).with_context(|| format!("writing {}", p.display()))?;
    }
    let finals = res.finals();
    let txs: usize = res.nodes[0].chain().map(|b| b.transactions.len()).sum();
    let mut text = format!(
        "seed {} nodes {} simulated {} ms: {} trace lines, {} txs on node 0, {}",
        cfg.seed,
        cfg.nodes,
        cfg.duration_ms,
        res.trace.len(),
        txs,
        if res.converged() { "converged" } else { "diverged" }
    );
    for f in &finals {
        text.push_str(&format!("\n  node {} height {} head {} root {}", f.node, f.height, f.head, f.state_root));
    }
    Ok(Output::new(
        text,
        json!({ "converged": res.converged(), "trace_lines": res.trace.len(), "txs": txs, "finals": finals }),
    ))
}
