//! HTTP JSON gateway over a running node.
//!
//! Reads are answered from the last committed head published by the event
//! loop; the only write paths are transaction submission, content upload and
//! peer delivery, all of which are queued to the loop.

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use blockcampus_core::state::{Community, Post, PostKind};
use blockcampus_core::{
    to_canonical, Address, Block, Cid, ConsensusParams, EconParams, Hash, SignedTransaction, ValidatorSet,
};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::runtime::{NodeHandle, PeerEnvelope};

pub const DEFAULT_PAGE: usize = 20;
pub const MAX_PAGE: usize = 100;

pub fn router(node: NodeHandle) -> Router {
    Router::new()
        .route("/v1/transactions", post(submit_tx))
        .route("/v1/blocks/head", get(head_block))
        .route("/v1/blocks/{hash}", get(block_by_hash))
        .route("/v1/blocks/height/{height}", get(block_by_height))
        .route("/v1/accounts/{address}", get(account))
        .route("/v1/communities", get(communities))
        .route("/v1/communities/{id}/posts", get(community_posts))
        .route("/v1/posts/{id}", get(post_detail))
        .route("/v1/content", post(put_content))
        .route("/v1/content/{cid}", get(get_content))
        .route("/v1/mempool", get(mempool))
        .route("/v1/chain/params", get(chain_params))
        .route("/v1/p2p", post(p2p))
        .with_state(node)
}

pub async fn serve(node: NodeHandle, listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(node)).await
}

fn json<T: Serialize>(status: StatusCode, body: &T) -> Response {
    match to_canonical(body) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    json(status, &ErrorBody { error: msg.into() })
}

fn not_found(what: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("unknown {what}"))
}

fn parse<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T, Response> {
    raw.parse().map_err(|_| error(StatusCode::BAD_REQUEST, format!("malformed {what}: {raw:?}")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_hash: Option<Hash>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

async fn submit_tx(State(node): State<NodeHandle>, body: Bytes) -> Response {
    let rejected = |reason: &str, message: String| {
        let body = SubmitResponse {
            status: "rejected".into(),
            tx_hash: None,
            reason: Some(reason.into()),
            message: Some(message),
        };
        json(StatusCode::BAD_REQUEST, &body)
    };
    let tx: SignedTransaction = match serde_json::from_slice(&body) {
        Ok(tx) => tx,
        Err(e) => return rejected("Malformed", e.to_string()),
    };
    match node.submit(tx).await {
        Ok(tx_hash) => {
            let body = SubmitResponse { status: "accepted".into(), tx_hash: Some(tx_hash), reason: None, message: None };
            json(StatusCode::OK, &body)
        }
        Err(e) => rejected(e.code(), e.to_string()),
    }
}

#[derive(Serialize)]
pub struct BlockView<'a> {
    pub hash: Hash,
    #[serde(flatten)]
    pub block: &'a Block,
}

fn block_response(block: &Block) -> Response {
    json(StatusCode::OK, &BlockView { hash: block.hash(), block })
}

async fn head_block(State(node): State<NodeHandle>) -> Response {
    block_response(&node.view().head)
}

async fn block_by_hash(State(node): State<NodeHandle>, Path(raw): Path<String>) -> Response {
    let hash: Hash = match parse(&raw, "block hash") {
        Ok(h) => h,
        Err(r) => return r,
    };
    match node.view().block_by_hash(&hash) {
        Some(b) => block_response(b),
        None => not_found("block"),
    }
}

async fn block_by_height(State(node): State<NodeHandle>, Path(raw): Path<String>) -> Response {
    let height: u64 = match parse(&raw, "height") {
        Ok(h) => h,
        Err(r) => return r,
    };
    match node.view().block_at(height) {
        Some(b) => block_response(b),
        None => not_found("block"),
    }
}

async fn account(State(node): State<NodeHandle>, Path(raw): Path<String>) -> Response {
    let address: Address = match parse(&raw, "address") {
        Ok(a) => a,
        Err(r) => return r,
    };
    match node.view().state.account(&address) {
        Some(a) => json(StatusCode::OK, a),
        None => not_found("account"),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CommunityView {
    #[serde(flatten)]
    pub community: Community,
    pub questions: u64,
}

async fn communities(State(node): State<NodeHandle>) -> Response {
    let view = node.view();
    let list: Vec<CommunityView> = view
        .state
        .communities
        .values()
        .map(|c| CommunityView {
            community: c.clone(),
            questions: view
                .state
                .posts
                .values()
                .filter(|p| p.kind == PostKind::Question && p.community == c.id && !p.hidden)
                .count() as u64,
        })
        .collect();
    json(StatusCode::OK, &list)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostSummary {
    #[serde(flatten)]
    pub post: Post,
    pub rank_score: i64,
}

impl PostSummary {
    fn of(post: &Post) -> Self {
        PostSummary { post: post.clone(), rank_score: post.rank_score() }
    }
}

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    sort: Option<String>,
    limit: Option<usize>,
    offset: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PostPage {
    pub total: u64,
    pub offset: u64,
    pub posts: Vec<PostSummary>,
}

/// Highest rank first, newer first on ties.
fn by_rank(a: &PostSummary, b: &PostSummary) -> std::cmp::Ordering {
    b.rank_score.cmp(&a.rank_score).then_with(|| by_age(a, b))
}

fn by_age(a: &PostSummary, b: &PostSummary) -> std::cmp::Ordering {
    b.post.created_height.cmp(&a.post.created_height).then_with(|| a.post.id.cmp(&b.post.id))
}

async fn community_posts(
    State(node): State<NodeHandle>,
    Path(id): Path<String>,
    Query(q): Query<PageQuery>,
) -> Response {
    let view = node.view();
    if !view.state.communities.contains_key(&id) {
        return not_found("community");
    }
    let order = match q.sort.as_deref() {
        None | Some("new") => by_age,
        Some("top") => by_rank,
        Some(other) => return error(StatusCode::BAD_REQUEST, format!("sort must be top or new, got {other:?}")),
    };
    let mut posts: Vec<PostSummary> = view
        .state
        .posts
        .values()
        .filter(|p| p.kind == PostKind::Question && p.community == id && !p.hidden)
        .map(PostSummary::of)
        .collect();
    posts.sort_by(order);
    let total = posts.len() as u64;
    let offset = q.offset.unwrap_or(0);
    let limit = q.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let posts = posts.into_iter().skip(offset).take(limit).collect();
    json(StatusCode::OK, &PostPage { total, offset: offset as u64, posts })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PostDetail {
    #[serde(flatten)]
    pub post: PostSummary,
    pub answers: Vec<PostSummary>,
}

async fn post_detail(State(node): State<NodeHandle>, Path(raw): Path<String>) -> Response {
    let id: Hash = match parse(&raw, "post id") {
        Ok(h) => h,
        Err(r) => return r,
    };
    let view = node.view();
    let Some(post) = view.state.posts.get(&id) else { return not_found("post") };
    let mut answers: Vec<PostSummary> =
        view.state.posts.values().filter(|p| p.parent == Some(id)).map(PostSummary::of).collect();
    answers.sort_by(by_rank);
    json(StatusCode::OK, &PostDetail { post: PostSummary::of(post), answers })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CidBody {
    pub cid: Cid,
}

async fn put_content(State(node): State<NodeHandle>, body: Bytes) -> Response {
    match node.put_content(body.to_vec()).await {
        Ok(cid) => json(StatusCode::OK, &CidBody { cid }),
        Err(e) => error(StatusCode::BAD_REQUEST, e),
    }
}

async fn get_content(State(node): State<NodeHandle>, Path(raw): Path<String>) -> Response {
    let cid: Cid = match parse(&raw, "cid") {
        Ok(c) => c,
        Err(r) => return r,
    };
    match node.get_content(cid).await {
        Some(bytes) => ([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response(),
        None => not_found("content"),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MempoolEntry {
    pub tx_hash: Hash,
    pub tx: SignedTransaction,
}

async fn mempool(State(node): State<NodeHandle>) -> Response {
    let view = node.view();
    let entries: Vec<MempoolEntry> =
        view.mempool.iter().map(|tx| MempoolEntry { tx_hash: tx.hash(), tx: tx.clone() }).collect();
    json(StatusCode::OK, &entries)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChainParams {
    pub chain_id: String,
    pub genesis_hash: Hash,
    pub genesis_time: u64,
    pub validators: ValidatorSet,
    pub consensus: ConsensusParams,
    pub econ: EconParams,
    pub head_height: u64,
    pub head_hash: Hash,
    pub head_score: u64,
}

async fn chain_params(State(node): State<NodeHandle>) -> Response {
    let view = node.view();
    let g = &view.genesis;
    let params = ChainParams {
        chain_id: g.chain_id.clone(),
        genesis_hash: view.chain[0].hash(),
        genesis_time: g.genesis_time,
        validators: g.validators.clone(),
        consensus: g.consensus,
        econ: g.econ,
        head_height: view.head.height(),
        head_hash: view.head.hash(),
        head_score: view.head_score,
    };
    json(StatusCode::OK, &params)
}

async fn p2p(State(node): State<NodeHandle>, body: Bytes) -> Response {
    match serde_json::from_slice::<PeerEnvelope>(&body) {
        Ok(envelope) => {
            node.deliver(envelope).await;
            StatusCode::ACCEPTED.into_response()
        }
        Err(e) => error(StatusCode::BAD_REQUEST, e.to_string()),
    }
}
