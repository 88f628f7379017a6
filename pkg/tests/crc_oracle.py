"""Bit-serial CRC-16/CCITT-FALSE reference used only by the tests."""


def crc16_bitwise(bits, poly=0x1021, init=0xFFFF):
    reg = init
    for b in bits:
        top = (reg >> 15) & 1
        reg = (reg << 1) & 0xFFFF
        if top ^ (int(b) & 1):
            reg ^= poly
    return reg


def ascii_bits(text):
    return [(byte >> (7 - i)) & 1 for byte in text.encode("ascii") for i in range(8)]
