//! In-process typed publish/subscribe bus with deterministic delivery.
//!
//! Publishing stamps an envelope and queues it; nothing reaches a mailbox
//! until [`Bus::drain`] is called. Drain delivers in `(sim_time, publisher
//! registration index, publish order)` order, so a run's delivery sequence
//! depends only on what was published, never on thread timing.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A message type carried on the bus. `kind` names the variant so topics can
/// be checked against their declared payload kind.
pub trait Payload: Clone {
    fn kind(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublisherId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubscriberId(usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<P> {
    pub topic: String,
    pub publisher: String,
    pub seq: u64,
    pub sim_time: u64,
    pub payload: P,
}

struct PublisherState {
    name: String,
    last_time: Option<u64>,
    seqs: HashMap<String, u64>,
}

struct Pending<P> {
    envelope: Arc<Envelope<P>>,
    targets: Vec<SubscriberId>,
    publisher: usize,
    counter: u64,
}

struct Mailbox<P> {
    name: String,
    queue: VecDeque<Arc<Envelope<P>>>,
}

pub struct Bus<P> {
    topics: BTreeMap<String, &'static str>,
    publishers: Vec<PublisherState>,
    subscriptions: HashMap<String, Vec<SubscriberId>>,
    mailboxes: Vec<Mailbox<P>>,
    mailbox_index: HashMap<String, SubscriberId>,
    pending: Vec<Pending<P>>,
    counter: u64,
    log: Vec<Arc<Envelope<P>>>,
    delivered: u64,
}

impl<P: Payload> Default for Bus<P> {
    fn default() -> Self {
        Bus::new()
    }
}

impl<P: Payload> Bus<P> {
    pub fn new() -> Self {
        Bus {
            topics: BTreeMap::new(),
            publishers: Vec::new(),
            subscriptions: HashMap::new(),
            mailboxes: Vec::new(),
            mailbox_index: HashMap::new(),
            pending: Vec::new(),
            counter: 0,
            log: Vec::new(),
            delivered: 0,
        }
    }

    /// Declares a topic and the payload kind it carries. Re-registering with
    /// the same kind is a no-op.
    pub fn register_topic(&mut self, topic: &str, kind: &'static str) -> Result<()> {
        match self.topics.get(topic) {
            Some(k) if *k != kind => Err(Error::KindMismatch {
                topic: topic.into(),
                expected: (*k).into(),
                got: kind.into(),
            }),
            _ => {
                self.topics.insert(topic.into(), kind);
                Ok(())
            }
        }
    }

    /// Topic name → payload kind, in name order.
    pub fn registry(&self) -> BTreeMap<String, String> {
        self.topics.iter().map(|(t, k)| (t.clone(), k.to_string())).collect()
    }

    /// Registration order breaks ties between publishers at equal sim time.
    pub fn register_publisher(&mut self, name: &str) -> PublisherId {
        if let Some(i) = self.publishers.iter().position(|p| p.name == name) {
            return PublisherId(i);
        }
        self.publishers.push(PublisherState { name: name.into(), last_time: None, seqs: HashMap::new() });
        PublisherId(self.publishers.len() - 1)
    }

    fn mailbox(&mut self, subscriber: &str) -> SubscriberId {
        if let Some(id) = self.mailbox_index.get(subscriber) {
            return *id;
        }
        let id = SubscriberId(self.mailboxes.len());
        self.mailboxes.push(Mailbox { name: subscriber.into(), queue: VecDeque::new() });
        self.mailbox_index.insert(subscriber.into(), id);
        id
    }

    /// Subscribes `subscriber` to `topic`. All topics of one subscriber feed a
    /// single mailbox, so the subscriber sees one merged, ordered stream.
    pub fn subscribe(&mut self, topic: &str, subscriber: &str) -> Result<SubscriberId> {
        if !self.topics.contains_key(topic) {
            return Err(Error::UnknownTopic(topic.into()));
        }
        let id = self.mailbox(subscriber);
        let subs = self.subscriptions.entry(topic.into()).or_default();
        if subs.contains(&id) {
            return Err(Error::DuplicateSubscription { topic: topic.into(), subscriber: subscriber.into() });
        }
        subs.push(id);
        Ok(id)
    }

    pub fn subscriber_count(&self, topic: &str) -> usize {
        self.subscriptions.get(topic).map_or(0, Vec::len)
    }

    pub fn publish(&mut self, publisher: PublisherId, topic: &str, payload: P, sim_time: u64) -> Result<Arc<Envelope<P>>> {
        let expected = *self.topics.get(topic).ok_or_else(|| Error::UnknownTopic(topic.into()))?;
        if payload.kind() != expected {
            return Err(Error::KindMismatch { topic: topic.into(), expected: expected.into(), got: payload.kind().into() });
        }
        let state = &mut self.publishers[publisher.0];
        if let Some(last) = state.last_time.filter(|&last| sim_time < last) {
            return Err(Error::TimeRegression { publisher: state.name.clone(), time: sim_time, last });
        }
        state.last_time = Some(sim_time);
        let seq = state.seqs.entry(topic.into()).or_insert(0);
        *seq += 1;
        let envelope = Arc::new(Envelope {
            topic: topic.into(),
            publisher: state.name.clone(),
            seq: *seq,
            sim_time,
            payload,
        });
        self.counter += 1;
        // the subscriber set is fixed at publish time
        let targets = self.subscriptions.get(topic).cloned().unwrap_or_default();
        self.pending.push(Pending { envelope: envelope.clone(), targets, publisher: publisher.0, counter: self.counter });
        Ok(envelope)
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Delivers every pending envelope with `sim_time <= until`; returns the
    /// number of mailbox deliveries.
    pub fn drain(&mut self, until: u64) -> usize {
        let (mut ready, rest): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.pending).into_iter().partition(|p| p.envelope.sim_time <= until);
        self.pending = rest;
        ready.sort_by_key(|p| (p.envelope.sim_time, p.publisher, p.counter));
        let mut count = 0;
        for p in ready {
            for t in &p.targets {
                self.mailboxes[t.0].queue.push_back(p.envelope.clone());
                count += 1;
            }
            self.log.push(p.envelope);
        }
        self.delivered += count as u64;
        count
    }

    pub fn recv(&mut self, subscriber: SubscriberId) -> Option<Arc<Envelope<P>>> {
        self.mailboxes[subscriber.0].queue.pop_front()
    }

    pub fn recv_all(&mut self, subscriber: SubscriberId) -> Vec<Arc<Envelope<P>>> {
        self.mailboxes[subscriber.0].queue.drain(..).collect()
    }

    pub fn subscriber_name(&self, subscriber: SubscriberId) -> &str {
        &self.mailboxes[subscriber.0].name
    }

    /// Every drained envelope, in delivery order.
    pub fn log(&self) -> &[Arc<Envelope<P>>] {
        &self.log
    }

    pub fn total_delivered(&self) -> u64 {
        self.delivered
    }
}
