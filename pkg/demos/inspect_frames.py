"""Follow one telemetry report through the 44-bit codec.

Quantizes a live-looking operating point into an uplink word, prints
both renderings, then shows the byte-level container catching a
single flipped bit.
"""

from luxnet.protocol import (
    Frame44,
    FrameError,
    GenericFrame,
    NodeToOap,
    OapToNode,
    decode_frame,
    decode44,
    encode_frame,
    encode44,
    format_word,
    quantize_temperature,
    quantize_voltage,
    temperature_from_code,
    voltage_from_code,
)


def main():
    v_pv, v_cap, temp = 3.259, 4.437, 24.3
    report = NodeToOap(sender_id=2,
                       pv_level=quantize_voltage(v_pv),
                       cap_level=quantize_voltage(v_cap),
                       sensor=quantize_temperature(temp))
    frame = Frame44(dest_address=0, payload=report)
    word = encode44(frame)
    print(f"node 2 reports pv={v_pv} V cap={v_cap} V temp={temp} C")
    print(f"  encoded word: {format_word(word)}")
    back = decode44(word).payload
    print(f"  decoded back: pv={voltage_from_code(back.pv_level):.2f} V "
          f"cap={voltage_from_code(back.cap_level):.2f} V "
          f"temp={temperature_from_code(back.sensor):.1f} C "
          f"(codes {back.pv_level}/{back.cap_level}/{back.sensor})")

    command = Frame44(dest_address=2,
                      payload=OapToNode(command=2, param=1))
    print(f"  a share request for the same node: "
          f"{format_word(encode44(command))}")
    print()

    buf = encode_frame(GenericFrame(address=2, data=word.to_bytes(6, 'big')))
    print(f"byte container ({len(buf)} bytes): {buf.hex()}")
    damaged = bytearray(buf)
    damaged[5] ^= 0x10
    try:
        decode_frame(bytes(damaged))
        print("  flipped bit slipped through (should never happen)")
    except FrameError as err:
        print(f"  flipping one payload bit -> rejected: {err}")


if __name__ == "__main__":
    main()
