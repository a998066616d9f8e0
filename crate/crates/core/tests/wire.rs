use std::collections::BTreeMap;

use envlink::model::{AgentId, AgentMap, ResetResult, StepResult};
use envlink::space::{BoxSpace, Space};
use envlink::value::{DType, Tensor, Value};
use envlink::wire::{self, decode_stream, decode_value, encode_frame, encode_value, ErrorCode, FrameDecoder, Message};
use envlink::SideChannelMessage;
use proptest::prelude::*;
use serde_json::Value as Json;

fn from_tagged(j: &Json) -> Value {
    let (tag, body) = j.as_object().unwrap().iter().next().unwrap();
    match tag.as_str() {
        "bool" => Value::Bool(body.as_bool().unwrap()),
        "int" => Value::Int(body.as_str().unwrap().parse().unwrap()),
        "float" => Value::Float(f64::from_bits(u64::from_str_radix(body.as_str().unwrap(), 16).unwrap())),
        "str" => Value::Str(body.as_str().unwrap().to_owned()),
        "bytes" => Value::Bytes(hex::decode(body.as_str().unwrap()).unwrap()),
        "tensor" => {
            let dtype = match body["dtype"].as_str().unwrap() {
                "f32" => DType::F32,
                "f64" => DType::F64,
                "i32" => DType::I32,
                "i64" => DType::I64,
                "u8" => DType::U8,
                other => panic!("dtype {other}"),
            };
            let shape = body["shape"].as_array().unwrap().iter().map(|d| d.as_u64().unwrap() as u32).collect();
            let data = hex::decode(body["data"].as_str().unwrap()).unwrap();
            Value::Tensor(Tensor::from_bytes(dtype, shape, data).unwrap())
        }
        "list" => Value::List(body.as_array().unwrap().iter().map(from_tagged).collect()),
        "map" => Value::Map(
            body.as_array()
                .unwrap()
                .iter()
                .map(|kv| (kv[0].as_str().unwrap().to_owned(), from_tagged(&kv[1])))
                .collect(),
        ),
        other => panic!("unknown tag {other}"),
    }
}

fn golden(name: &str) -> Vec<Json> {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn golden_values_match_byte_for_byte() {
    let corpus = golden("values.json");
    assert!(corpus.len() >= 30);
    for entry in &corpus {
        let name = entry["name"].as_str().unwrap();
        let value = from_tagged(&entry["value"]);
        let expected = hex::decode(entry["hex"].as_str().unwrap()).unwrap();
        assert_eq!(hex::encode(encode_value(&value).unwrap()), hex::encode(&expected), "{name}");
        assert_eq!(decode_value(&expected).unwrap(), value, "{name}");
    }
}

fn a0() -> AgentId {
    AgentId::indexed(0)
}

fn obs(x: i64, y: i64) -> Value {
    Value::Tensor(Tensor::from_i64(vec![2], &[x, y]).unwrap())
}

fn box_f64(low: &[f64], high: &[f64]) -> Space {
    let n = low.len() as u32;
    Space::Box(BoxSpace::new(Tensor::from_f64(vec![n], low).unwrap(), Tensor::from_f64(vec![n], high).unwrap()).unwrap())
}

fn golden_message(name: &str) -> Message {
    match name {
        "close" => Message::Close,
        "space_query" => Message::SpaceQuery,
        "hello_claim_all" => Message::Hello { version: 1, agents: vec![] },
        "hello_two_agents" => Message::Hello {
            version: 1,
            agents: vec![a0(), AgentId::indexed(1)],
        },
        "reset_no_seed" => Message::Reset { round: 0, seed: None },
        "reset_seed_7" => Message::Reset { round: 3, seed: Some(7) },
        "step_right" => Message::Step {
            round: 1,
            actions: AgentMap::from([(a0(), Value::Int(3))]),
        },
        "reset_result" => Message::ResetResult {
            round: 0,
            result: ResetResult {
                observation: AgentMap::from([(a0(), obs(0, 0))]),
                info: BTreeMap::new(),
            },
        },
        "step_result" => Message::StepResult {
            round: 1,
            result: StepResult {
                observation: AgentMap::from([(a0(), obs(1, 0))]),
                reward: AgentMap::from([(a0(), -1.0)]),
                done: AgentMap::from([(a0(), false)]),
                last_action: AgentMap::from([(a0(), Value::Int(3))]),
                info: BTreeMap::new(),
            },
        },
        "side_channel" => Message::SideChannel(SideChannelMessage::new("env::max_steps", Value::Int(50)).unwrap()),
        "error_barrier_timeout" => Message::Error {
            code: ErrorCode::BarrierTimeout,
            concludes_round: true,
            round: 9,
            message: "barrier timed out".into(),
        },
        "space_reply_gridworld" => Message::SpaceReply {
            observation_space: AgentMap::from([(
                a0(),
                Space::Box(BoxSpace::new(Tensor::from_i64(vec![2], &[0, 0]).unwrap(), Tensor::from_i64(vec![2], &[4, 4]).unwrap()).unwrap()),
            )]),
            action_space: AgentMap::from([(a0(), Space::discrete(5).unwrap())]),
        },
        "hello_ack_pendulum" => Message::HelloAck {
            accepted: vec![a0()],
            observation_space: AgentMap::from([(a0(), box_f64(&[-1.0, -1.0, -8.0], &[1.0, 1.0, 8.0]))]),
            action_space: AgentMap::from([(a0(), box_f64(&[-2.0], &[2.0]))]),
            barrier_timeout_ms: 30_000,
            round: 0,
        },
        other => panic!("no message for {other}"),
    }
}

#[test]
fn golden_messages_match_byte_for_byte() {
    for entry in golden("messages.json") {
        let name = entry["name"].as_str().unwrap();
        let msg = golden_message(name);
        let expected = entry["frame"].as_str().unwrap();
        assert_eq!(hex::encode(encode_frame(&msg).unwrap()), expected, "{name}");
        assert_eq!(wire::decode_frame(&hex::decode(expected).unwrap()).unwrap(), msg, "{name}");
    }
}

#[test]
fn unknown_type_byte_is_rejected() {
    assert_eq!(wire::decode_frame(&[0, 0, 0, 1, 0x0B]), Err(wire::WireError::UnknownType(0x0B)));
}

fn arb_tensor() -> impl Strategy<Value = Tensor> {
    (0usize..5, prop::collection::vec(0u32..4, 0..3)).prop_flat_map(|(code, shape)| {
        let dtype = DType::ALL[code];
        let n: usize = shape.iter().map(|&d| d as usize).product();
        prop::collection::vec(any::<u8>(), n * dtype.width())
            .prop_map(move |data| Tensor::from_bytes(dtype, shape.clone(), data).unwrap())
    })
}

fn arb_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Int),
        any::<u64>().prop_map(|b| Value::Float(f64::from_bits(b))),
        ".{0,8}".prop_map(Value::Str),
        prop::collection::vec(any::<u8>(), 0..8).prop_map(Value::Bytes),
        arb_tensor().prop_map(Value::Tensor),
    ];
    // depth counts the leaf level, so three rounds of nesting give depth <= 4
    leaf.prop_recursive(3, 48, 5, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..5).prop_map(Value::List),
            prop::collection::btree_map(".{0,6}", inner, 0..5).prop_map(Value::Map),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn values_roundtrip_canonically(v in arb_value()) {
        prop_assert!(v.depth() <= 4);
        let bytes = encode_value(&v).unwrap();
        let back = decode_value(&bytes).unwrap();
        prop_assert_eq!(&back, &v);
        prop_assert_eq!(encode_value(&back).unwrap(), bytes);
    }
}

fn sample_stream() -> (Vec<Message>, Vec<u8>) {
    let msgs = vec![
        golden_message("hello_two_agents"),
        golden_message("step_result"),
        Message::SideChannel(SideChannelMessage::new("k", Value::Bytes(vec![7; 300])).unwrap()),
        golden_message("hello_ack_pendulum"),
        Message::Close,
        golden_message("error_barrier_timeout"),
    ];
    let bytes = msgs.iter().flat_map(|m| encode_frame(m).unwrap()).collect();
    (msgs, bytes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn stream_decoding_ignores_chunk_boundaries(cuts in prop::collection::vec(any::<prop::sample::Index>(), 0..40)) {
        let (msgs, bytes) = sample_stream();
        let mut at: Vec<usize> = cuts.iter().map(|i| i.index(bytes.len() + 1)).collect();
        at.push(0);
        at.push(bytes.len());
        at.sort_unstable();
        let chunks: Vec<&[u8]> = at.windows(2).map(|w| &bytes[w[0]..w[1]]).collect();
        prop_assert_eq!(decode_stream(chunks).unwrap(), msgs);
    }
}

#[test]
fn decoder_reports_truncation_only_at_end() {
    let (_, bytes) = sample_stream();
    let mut dec = FrameDecoder::new();
    dec.feed(&bytes[..bytes.len() - 1]);
    while dec.next_message().unwrap().is_some() {}
    assert!(dec.finish().is_err());
}

#[test]
fn map_keys_out_of_order_are_malformed() {
    // Map{"b": true, "a": true} written in the wrong order by hand
    let bad = hex::decode("0702000000010000006200010100000061".to_owned() + "0001").unwrap();
    assert!(decode_value(&bad).is_err());
}
