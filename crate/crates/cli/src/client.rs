//! Blocking client for the gateway API.

use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use blockcampus_core::state::Account;
use blockcampus_core::{Address, Cid, Hash, SignedTransaction};
use reqwest::blocking::{Client as Http, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::api::{ChainParams, CidBody, ErrorBody, MempoolEntry, PostDetail, SubmitResponse};

pub struct Client {
    base: String,
    http: Http,
}

/// A transaction the node refused, with its error code.
#[derive(Debug)]
pub struct Rejected {
    pub reason: String,
    pub message: String,
}

impl std::fmt::Display for Rejected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "transaction rejected: {} ({})", self.reason, self.message)
    }
}

impl std::error::Error for Rejected {}

impl Client {
    pub fn new(base: &str) -> Self {
        Client { base: base.trim_end_matches('/').to_owned(), http: Http::new() }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn decode<T: DeserializeOwned>(resp: Response) -> Result<T> {
        let status = resp.status();
        let bytes = resp.bytes()?;
        if !status.is_success() {
            let msg = serde_json::from_slice::<ErrorBody>(&bytes)
                .map(|e| e.error)
                .unwrap_or_else(|_| String::from_utf8_lossy(&bytes).into_owned());
            bail!("{msg} (HTTP {})", status.as_u16());
        }
        serde_json::from_slice(&bytes).context("unexpected response body")
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let resp = self.http.get(self.url(path)).send().with_context(|| format!("cannot reach {}", self.base))?;
        Self::decode(resp)
    }

    /// `None` when the node does not know the account.
    pub fn account(&self, address: &Address) -> Result<Option<Account>> {
        let resp = self.http.get(self.url(&format!("/v1/accounts/{address}"))).send()?;
        if resp.status() == StatusCode::NOT_FOUND {
            return Ok(None);
        }
        Self::decode(resp).map(Some)
    }

    pub fn post(&self, id: &Hash) -> Result<PostDetail> {
        self.get(&format!("/v1/posts/{id}"))
    }

    pub fn head(&self) -> Result<Value> {
        self.get("/v1/blocks/head")
    }

    pub fn params(&self) -> Result<ChainParams> {
        self.get("/v1/chain/params")
    }

    pub fn mempool(&self) -> Result<Vec<MempoolEntry>> {
        self.get("/v1/mempool")
    }

    /// Next unused nonce: committed nonce plus anything already queued.
    pub fn next_nonce(&self, sender: &Address) -> Result<u64> {
        let committed = self.account(sender)?.map_or(0, |a| a.nonce);
        let queued = self.mempool()?.iter().filter(|e| e.tx.sender() == *sender && e.tx.nonce >= committed).count();
        Ok(committed + queued as u64)
    }

    /// Waits until `sender`'s transaction with `nonce` is in a block.
    pub fn wait_applied(&self, sender: &Address, nonce: u64, timeout: Duration) -> Result<()> {
        let deadline = Instant::now() + timeout;
        loop {
            if self.account(sender)?.is_some_and(|a| a.nonce > nonce) {
                return Ok(());
            }
            if Instant::now() > deadline {
                bail!("nonce {nonce} of {sender} not included within {timeout:?}");
            }
            std::thread::sleep(Duration::from_millis(100));
        }
    }

    pub fn put_content(&self, bytes: Vec<u8>) -> Result<Cid> {
        let resp = self.http.post(self.url("/v1/content")).body(bytes).send()?;
        Ok(Self::decode::<CidBody>(resp)?.cid)
    }

    pub fn submit(&self, tx: &SignedTransaction) -> Result<Hash> {
        let body = blockcampus_core::to_canonical(tx)?;
        let resp = self
            .http
            .post(self.url("/v1/transactions"))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .with_context(|| format!("cannot reach {}", self.base))?;
        let status = resp.status();
        let reply: SubmitResponse = serde_json::from_slice(&resp.bytes()?).context("unexpected response body")?;
        match (status.is_success(), reply.tx_hash) {
            (true, Some(h)) => Ok(h),
            _ => Err(anyhow!(Rejected {
                reason: reply.reason.unwrap_or_else(|| format!("HTTP {}", status.as_u16())),
                message: reply.message.unwrap_or_default(),
            })),
        }
    }
}
